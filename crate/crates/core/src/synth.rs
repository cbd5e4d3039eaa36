//! Deterministic synthetic corpus: six behavior families of ten extensions
//! each plus unrelated singletons, with store metadata, ground-truth labels,
//! evaluation pairs and detection reports.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::{ExtensionRecord, VettingLabel};
use crate::cluster::Expectation;
use crate::crx::{wrap_crx3, FileTree};

pub const FAMILY_SIZE: usize = 10;
pub const SINGLETONS: usize = 10;
pub const DEFAULT_SEED: u64 = 0x00c0_ffee;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    NewTab,
    SpamPopup,
    StorageHeavy,
    TabsHeavy,
    EvalObfuscated,
    EmptyManifest,
}

impl Family {
    pub const ALL: [Family; 6] =
        [Family::NewTab, Family::SpamPopup, Family::StorageHeavy, Family::TabsHeavy, Family::EvalObfuscated, Family::EmptyManifest];

    pub fn name(self) -> &'static str {
        match self {
            Family::NewTab => "new_tab",
            Family::SpamPopup => "spam_popup",
            Family::StorageHeavy => "storage_heavy",
            Family::TabsHeavy => "tabs_heavy",
            Family::EvalObfuscated => "eval_obfuscated",
            Family::EmptyManifest => "empty_manifest",
        }
    }

    pub fn index(self) -> usize {
        Family::ALL.iter().position(|&f| f == self).expect("listed")
    }
}

#[derive(Debug, Clone)]
pub struct SynthExtension {
    pub id: String,
    pub family: Option<Family>,
    pub tree: FileTree,
    pub record: ExtensionRecord,
    /// API paths reachable only through `eval`ed strings.
    pub hidden_calls: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub extensions: Vec<SynthExtension>,
    pub crawl_end: NaiveDate,
}

#[derive(Debug, Clone)]
pub struct SynthPaths {
    pub packages: PathBuf,
    pub metadata: PathBuf,
    pub truth: PathBuf,
    pub pairs: PathBuf,
    pub detections: PathBuf,
}

/// Chrome-style id: the first 128 bits of a digest, one `a`..`p` letter per nibble.
pub fn extension_id(seed: &str) -> String {
    Sha256::digest(seed.as_bytes())[..16]
        .iter()
        .flat_map(|b| [b >> 4, b & 15])
        .map(|n| (b'a' + n) as char)
        .collect()
}

fn manifest(value: serde_json::Value) -> Vec<u8> {
    serde_json::to_vec_pretty(&value).expect("json")
}

fn tree(files: Vec<(&str, Vec<u8>)>) -> FileTree {
    let mut t = FileTree::new();
    for (p, c) in files {
        t.insert(p, c).expect("unique fixture paths");
    }
    t
}

const WORDS: &[&str] = &[
    "Ocean", "Aurora", "Forest", "Nebula", "Sunset", "Glacier", "Canyon", "Meadow", "Harbor", "Summit", "Lagoon", "Prairie",
];

/// Scaffold shared by every campaign family: the clone operators build from
/// one template, so packages of different families still share this code.
const TEMPLATE_JS: &str = r#"
var sdk = { v: chrome.runtime.getManifest().version, lang: chrome.i18n.getUILanguage() };
chrome.runtime.getPlatformInfo(function (p) { sdk.os = p.os; });
chrome.i18n.getAcceptLanguages(function (l) { sdk.langs = l; });
chrome.management.getSelf(function (s) { sdk.mode = s.installType; });
"#;

fn template_manifest(mut value: serde_json::Value) -> Vec<u8> {
    value["default_locale"] = "en".into();
    value["icons"] = serde_json::json!({"16": "icons/16.png", "48": "icons/48.png", "128": "icons/128.png"});
    value["minimum_chrome_version"] = "96".into();
    value["offline_enabled"] = true.into();
    manifest(value)
}

fn new_tab(i: usize, rng: &mut ChaCha8Rng) -> (FileTree, Vec<String>) {
    let word = WORDS[i % WORDS.len()];
    let extra = ["chrome.bookmarks.getRecent(8, render);", "chrome.history.search({ text: '' }, render);", "chrome.sessions.getRecentlyClosed(render);"]
        [rng.gen_range(0..3)];
    let js = format!(
        r#"function render(items) {{
  var grid = document.getElementById("grid");
  for (var i = 0; i < items.length; i++) grid.appendChild(document.createElement("a"));
}}
chrome.topSites.get(render);
chrome.storage.local.get(["wallpaper"], function (cfg) {{
  document.body.style.backgroundImage = "url(" + (cfg.wallpaper || "img/{word}.jpg") + ")";
}});
document.getElementById("q").addEventListener("keydown", function (e) {{
  if (e.key === "Enter") chrome.search.query({{ text: e.target.value, disposition: "CURRENT_TAB" }});
}});
{extra}{TEMPLATE_JS}
"#
    );
    let m = template_manifest(serde_json::json!({
        "manifest_version": 3,
        "name": format!("{word} Wallpaper HD New Tab"),
        "version": format!("1.{}.{}", i, rng.gen_range(0..9)),
        "description": format!("Beautiful {word} wallpapers on every new tab."),
        "chrome_url_overrides": {"newtab": "newtab.html"},
        "permissions": ["storage", "topSites", "search"],
        "icons": {"16": "img/icon16.png", "128": "img/icon128.png"},
    }));
    let html = b"<html><body><input id=q><div id=grid></div><script src=\"newtab.js\"></script></body></html>".to_vec();
    let t = tree(vec![
        ("manifest.json", m),
        ("newtab.html", html),
        ("newtab.js", js.into_bytes()),
        ("img/icon16.png", vec![0x89, b'P', b'N', b'G', i as u8]),
        ("img/icon128.png", vec![0x89, b'P', b'N', b'G', 128, i as u8]),
    ]);
    (t, Vec::new())
}

fn spam_popup(i: usize, rng: &mut ChaCha8Rng) -> (FileTree, Vec<String>) {
    let domain = format!("deals{}.example", rng.gen_range(100..999));
    let extra = ["chrome.action.setBadgeText({ text: 'NEW' });", "chrome.action.setBadgeBackgroundColor({ color: '#f00' });", "chrome.tabs.query({ active: true }, function (t) {});"]
        [i % 3];
    let popup = format!(
        r#"var offers = ["coupon", "prize", "bonus"];
document.getElementById("go").addEventListener("click", function () {{
  var pick = offers[Math.floor(Math.random() * offers.length)];
  chrome.tabs.create({{ url: "https://{domain}/" + pick }});
  window.close();
}});
{extra}{TEMPLATE_JS}
"#
    );
    let bg = format!(
        r#"chrome.runtime.onInstalled.addListener(function () {{
  chrome.tabs.create({{ url: "https://{domain}/welcome" }});
  chrome.runtime.setUninstallURL("https://{domain}/bye");
}});
"#
    );
    let m = template_manifest(serde_json::json!({
        "manifest_version": 3,
        "name": format!("Coupon Finder {i}"),
        "version": "2.0",
        "action": {"default_popup": "popup.html", "default_title": "Deals"},
        "background": {"service_worker": "bg.js"},
        "permissions": ["tabs"],
    }));
    let t = tree(vec![
        ("manifest.json", m),
        ("popup.html", b"<button id=go>Get deal</button><script src=popup.js></script>".to_vec()),
        ("popup.js", popup.into_bytes()),
        ("bg.js", bg.into_bytes()),
    ]);
    (t, Vec::new())
}

fn storage_heavy(i: usize, rng: &mut ChaCha8Rng) -> (FileTree, Vec<String>) {
    let key = format!("notes{}", rng.gen_range(0..1000));
    let extra = ["chrome.storage.local.getBytesInUse(null, function (n) {});", "chrome.storage.sync.clear();", "chrome.storage.session.set({ open: true });"]
        [i % 3];
    let bg = format!(
        r#"const KEY = "{key}";
function save(list) {{
  chrome.storage.sync.set({{ [KEY]: list }});
  chrome.storage.local.set({{ backup: JSON.stringify(list) }});
}}
chrome.storage.sync.get(KEY, function (res) {{
  var list = res[KEY] || [];
  list.push({{ at: Date.now() }});
  save(list);
}});
chrome.storage.onChanged.addListener(function (changes, area) {{
  if (area === "sync") chrome.storage.local.remove("stale");
}});
chrome.runtime.onMessage.addListener(function (msg, sender, reply) {{
  chrome.storage.local.get(null, reply);
  return true;
}});
{extra}{TEMPLATE_JS}
"#
    );
    let m = template_manifest(serde_json::json!({
        "manifest_version": 3,
        "name": format!("Quick Notes {i}"),
        "version": "0.9",
        "background": {"service_worker": "background.js"},
        "permissions": ["storage", "unlimitedStorage"],
        "options_page": "options.html",
    }));
    let t = tree(vec![
        ("manifest.json", m),
        ("background.js", bg.into_bytes()),
        ("options.html", b"<form></form>".to_vec()),
    ]);
    (t, Vec::new())
}

fn tabs_heavy(i: usize, rng: &mut ChaCha8Rng) -> (FileTree, Vec<String>) {
    let limit = rng.gen_range(5..50);
    let extra = ["chrome.tabs.discard(tab.id);", "chrome.tabs.move(tab.id, { index: 0 });", "chrome.tabs.reload(tab.id);"][i % 3];
    let bg = format!(
        r#"function tidy() {{
  chrome.tabs.query({{}}, function (tabs) {{
    if (tabs.length > {limit}) chrome.tabs.remove(tabs[0].id);
    tabs.forEach(function (tab) {{
      if (tab.pinned) chrome.tabs.update(tab.id, {{ muted: true }});
    }});
  }});
}}
chrome.tabs.onUpdated.addListener(function (id, info, tab) {{
  if (info.status === "complete") tidy();
}});
chrome.tabs.onActivated.addListener(function (active) {{
  chrome.tabs.get(active.tabId, function (tab) {{ {extra} }});
}});
chrome.windows.getAll({{ populate: true }}, function (w) {{}});{TEMPLATE_JS}
"#
    );
    let m = template_manifest(serde_json::json!({
        "manifest_version": 3,
        "name": format!("Tab Tamer {i}"),
        "version": "3.1",
        "background": {"service_worker": "worker.js"},
        "permissions": ["tabs", "activeTab"],
    }));
    (tree(vec![("manifest.json", m), ("worker.js", bg.into_bytes())]), Vec::new())
}

const HIDDEN_POOL: &[(&str, &str)] = &[
    ("browser.management.getAll", "management.getAll(function (x) {})"),
    ("browser.downloads.search", "downloads.search({}, function (x) {})"),
    ("browser.bookmarks.getTree", "bookmarks.getTree(function (x) {})"),
];

fn eval_obfuscated(i: usize, _rng: &mut ChaCha8Rng) -> (FileTree, Vec<String>) {
    let (extra_path, extra_src) = HIDDEN_POOL[i % HIDDEN_POOL.len()];
    let js = format!(
        r#"var r = "chr" + "ome";
var a = "coo" + "kies", b = "hist" + "ory";
eval(r + "." + a + ".getAll({{}}, function (c) {{ " + r + "." + b + ".search({{ text: '' }}, function (h) {{}}); }})");
function beacon() {{
  var w = "web" + "Request";
  eval(r + "." + w + ".onBeforeRequest.addListener(function (d) {{ return {{}}; }}, {{ urls: ['<all_urls>'] }})");
}}
eval(r + ".{extra_src}");{TEMPLATE_JS}
"#
    );
    let m = template_manifest(serde_json::json!({
        "manifest_version": 2,
        "name": format!("PDF Converter Pro {i}"),
        "version": "1.0.1",
        "background": {"scripts": ["lib.js"]},
        "permissions": ["cookies", "history", "webRequest", "<all_urls>"],
    }));
    let hidden = vec![
        "browser.cookies.getAll".to_string(),
        "browser.history.search".to_string(),
        "browser.webRequest.onBeforeRequest.addListener".to_string(),
        extra_path.to_string(),
    ];
    (tree(vec![("manifest.json", m), ("lib.js", js.into_bytes())]), hidden)
}

fn empty_manifest(i: usize, _rng: &mut ChaCha8Rng) -> (FileTree, Vec<String>) {
    let m = manifest(serde_json::json!({
        "manifest_version": 3,
        "name": format!("Placeholder {i}"),
        "version": format!("0.0.{i}"),
        "description": "Coming soon",
    }));
    (tree(vec![("manifest.json", m)]), Vec::new())
}

/// Namespaces for singletons; each singleton takes a disjoint triple.
const SINGLETON_APIS: &[(&str, &str)] = &[
    ("alarms", "alarms.create('tick', { periodInMinutes: 5 })"),
    ("notifications", "notifications.create({ type: 'basic', title: 'x' })"),
    ("contextMenus", "contextMenus.create({ id: 'm', title: 'x' })"),
    ("downloads", "downloads.download({ url: 'https://x.example/f' })"),
    ("identity", "identity.getAuthToken({ interactive: true }, function (t) {})"),
    ("idle", "idle.queryState(60, function (s) {})"),
    ("power", "power.requestKeepAwake('display')"),
    ("tts", "tts.speak('hello')"),
    ("fontSettings", "fontSettings.getFontList(function (f) {})"),
    ("declarativeNetRequest", "declarativeNetRequest.getDynamicRules(function (r) {})"),
    ("scripting", "scripting.executeScript({ target: { tabId: 1 }, files: ['a.js'] })"),
    ("webNavigation", "webNavigation.onCompleted.addListener(function (d) {})"),
    ("gcm", "gcm.register(['1'], function (id) {})"),
    ("pageCapture", "pageCapture.saveAsMHTML({ tabId: 1 }, function (b) {})"),
    ("debugger", "debugger.attach({ tabId: 1 }, '1.3')"),
    ("tabGroups", "tabGroups.query({}, function (g) {})"),
    ("readingList", "readingList.query({}, function (e) {})"),
    ("offscreen", "offscreen.createDocument({ url: 'o.html', reasons: ['CLIPBOARD'], justification: 'x' })"),
    ("browsingData", "browsingData.removeCache({})"),
    ("contentSettings", "contentSettings.cookies.set({ primaryPattern: '<all_urls>', setting: 'block' })"),
    ("sidePanel", "sidePanel.setOptions({ path: 'panel.html' })"),
    ("proxy", "proxy.settings.set({ value: { mode: 'system' } })"),
    ("privacy", "privacy.network.webRTCIPHandlingPolicy.set({ value: 'default' })"),
    ("system.cpu", "system.cpu.getInfo(function (i) {})"),
    ("system.memory", "system.memory.getInfo(function (i) {})"),
    ("geolocation", "geolocation.getCurrentPosition(function (p) {})"),
    ("clipboardRead", "clipboard.readText()"),
    ("ttsEngine", "ttsEngine.onSpeak.addListener(function (u) {})"),
    ("printerProvider", "printerProvider.onGetPrintersRequested.addListener(function (r) {})"),
    ("enterprise.deviceAttributes", "enterprise.deviceAttributes.getDirectoryDeviceId(function (d) {})"),
];

/// Host entries per singleton. Unrelated packages differ in size as well as
/// vocabulary, so the lists are spread rather than uniform.
const SINGLETON_HOSTS: [usize; 10] = [12, 4, 9, 16, 6, 11, 3, 14, 8, 18];

fn singleton(i: usize, _rng: &mut ChaCha8Rng) -> (FileTree, Vec<String>) {
    let apis = &SINGLETON_APIS[3 * i..3 * i + 3];
    let word = WORDS[i % WORDS.len()].to_lowercase();
    let mut js = String::new();
    for (ns, call) in apis {
        // geolocation and clipboard live on navigator rather than the extension API.
        let root = if matches!(*ns, "geolocation" | "clipboardRead") { "navigator" } else { "chrome" };
        let _ = writeln!(js, "{root}.{call};");
    }
    // Most of the vocabulary is the package's own site list, which MV2
    // declares next to the API permissions.
    let mut perms: Vec<String> = apis.iter().map(|a| a.0.to_string()).collect();
    perms.extend((0..SINGLETON_HOSTS[i]).map(|k| format!("*://{word}{k}.site{i}.example/*")));
    let script = format!("s{i}.js");
    let value = serde_json::json!({
        "manifest_version": 2,
        "name": format!("Utility {i}"),
        "version": "1.0",
        "background": {"scripts": [script]},
        "permissions": perms,
    });
    (tree(vec![("manifest.json", manifest(value)), (script.as_str(), js.into_bytes())]), Vec::new())
}

/// Vetting outcome per family member: (vetted label for the first k members, unpublished count).
fn family_labels(f: Family) -> (VettingLabel, usize, usize) {
    match f {
        Family::NewTab => (VettingLabel::Malware, 4, 2),
        Family::SpamPopup => (VettingLabel::Malware, 6, 2),
        Family::StorageHeavy => (VettingLabel::PolicyViolation, 3, 1),
        Family::TabsHeavy => (VettingLabel::MinorPolicyViolation, 2, 2),
        Family::EvalObfuscated => (VettingLabel::Malware, 7, 1),
        Family::EmptyManifest => (VettingLabel::None, 0, 3),
    }
}

pub fn generate(seed: u64) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date");
    let crawl_end = NaiveDate::from_ymd_opt(2024, 6, 30).expect("valid date");
    let mut extensions = Vec::new();

    let mut push = |family: Option<Family>, i: usize, built: (FileTree, Vec<String>), label: VettingLabel, unpublished: bool, rng: &mut ChaCha8Rng| {
        let tag = family.map_or("singleton", Family::name);
        let id = extension_id(&format!("{seed}/{tag}/{i}"));
        let publish = base + Days::new(rng.gen_range(0..1200));
        let release = publish + Days::new(rng.gen_range(0..120));
        let removal = if label.is_vetted() {
            Some((release + Days::new(rng.gen_range(3..700))).min(crawl_end))
        } else if unpublished {
            Some((release + Days::new(rng.gen_range(30..400))).min(crawl_end))
        } else {
            None
        };
        let (tree, hidden_calls) = built;
        let name = String::from_utf8_lossy(tree.manifest_bytes().unwrap_or_default()).to_string();
        let name = serde_json::from_str::<serde_json::Value>(&name)
            .ok()
            .and_then(|v| v.get("name").and_then(|n| n.as_str()).map(str::to_string))
            .unwrap_or_default();
        let record = ExtensionRecord {
            id: id.clone(),
            version: "1.0".into(),
            publisher: format!("{tag}-dev-{}", i % 3),
            user_count: rng.gen_range(0..50_000),
            publish_date: publish,
            version_release_date: release,
            removal_date: removal,
            vetting_label: label,
            name,
            sha256: None,
        };
        extensions.push(SynthExtension { id, family, tree, record, hidden_calls });
    };

    for f in Family::ALL {
        let (label, vetted, unpublished) = family_labels(f);
        for i in 0..FAMILY_SIZE {
            let built = match f {
                Family::NewTab => new_tab(i, &mut rng),
                Family::SpamPopup => spam_popup(i, &mut rng),
                Family::StorageHeavy => storage_heavy(i, &mut rng),
                Family::TabsHeavy => tabs_heavy(i, &mut rng),
                Family::EvalObfuscated => eval_obfuscated(i, &mut rng),
                Family::EmptyManifest => empty_manifest(i, &mut rng),
            };
            let l = if i < vetted { label } else { VettingLabel::None };
            let unpub = i >= vetted && i < vetted + unpublished;
            push(Some(f), i, built, l, unpub, &mut rng);
        }
    }
    for i in 0..SINGLETONS {
        let built = singleton(i, &mut rng);
        let label = if i < 2 { VettingLabel::Malware } else { VettingLabel::None };
        push(None, i, built, label, false, &mut rng);
    }

    for e in &mut extensions {
        e.record.sha256 = Some(crate::store::sha256_hex(&e.package_bytes()));
    }
    SynthCorpus { extensions, crawl_end }
}

impl SynthExtension {
    /// CRX3 bytes with a fixed opaque header.
    pub fn package_bytes(&self) -> Vec<u8> {
        wrap_crx3(&self.tree.to_zip(), b"\x12\x00synthetic-header")
    }
}

impl SynthCorpus {
    pub fn ids(&self) -> Vec<String> {
        self.extensions.iter().map(|e| e.id.clone()).collect()
    }

    /// Ground-truth family index per extension; `None` for singletons.
    pub fn truth(&self) -> Vec<Option<usize>> {
        self.extensions.iter().map(|e| e.family.map(Family::index)).collect()
    }

    pub fn family_of(&self, id: &str) -> Option<Family> {
        self.extensions.iter().find(|e| e.id == id).and_then(|e| e.family)
    }

    pub fn members(&self, f: Family) -> Vec<&SynthExtension> {
        self.extensions.iter().filter(|e| e.family == Some(f)).collect()
    }

    /// `n_similar` same-family pairs and `n_different` cross-family pairs.
    pub fn pairs(&self, n_similar: usize, n_different: usize, seed: u64) -> Vec<(String, String, Expectation)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        while out.len() < n_similar {
            let f = *Family::ALL.choose(&mut rng).expect("families");
            let m = self.members(f);
            let pick: Vec<_> = m.choose_multiple(&mut rng, 2).collect();
            let pair = (pick[0].id.clone(), pick[1].id.clone(), Expectation::Similar);
            if !out.contains(&pair) {
                out.push(pair);
            }
        }
        while out.len() < n_similar + n_different {
            let fs: Vec<_> = Family::ALL.choose_multiple(&mut rng, 2).copied().collect();
            let a = self.members(fs[0]).choose(&mut rng).expect("member").id.clone();
            let b = self.members(fs[1]).choose(&mut rng).expect("member").id.clone();
            let pair = (a, b, Expectation::Different);
            if !out.contains(&pair) {
                out.push(pair);
            }
        }
        out
    }

    /// Detection reports for the Malware-labeled extensions: one in four is
    /// missing, one in four is clean, the rest are flagged.
    pub fn detection_reports(&self) -> String {
        let mut s = String::new();
        let malware = self.extensions.iter().filter(|e| e.record.vetting_label == VettingLabel::Malware);
        for (k, e) in malware.enumerate() {
            if k % 4 == 0 {
                continue;
            }
            let total = 60 + k % 10;
            let flagged = if k % 4 == 1 { 0 } else { 3 + (k * 7) % 20 };
            let engines: Vec<serde_json::Value> = (0..total)
                .map(|j| {
                    let cat = if j < flagged { if j % 5 == 0 { "suspicious" } else { "malicious" } } else { "undetected" };
                    serde_json::json!({"name": format!("engine{j}"), "category": cat})
                })
                .collect();
            let label = match e.family {
                Some(Family::EvalObfuscated) => serde_json::json!("trojan.chromex"),
                Some(Family::SpamPopup) => serde_json::json!("adware.bulkext"),
                _ => serde_json::Value::Null,
            };
            let line = serde_json::json!({
                "sha256": e.record.sha256, "found": true, "engines": engines, "suggested_label": label,
            });
            let _ = writeln!(s, "{line}");
        }
        s
    }

    /// Writes packages, metadata, truth labels, 20+20 pairs and detection reports under `dir`.
    pub fn write(&self, dir: &Path) -> io::Result<SynthPaths> {
        let paths = SynthPaths {
            packages: dir.join("packages"),
            metadata: dir.join("metadata.jsonl"),
            truth: dir.join("truth.csv"),
            pairs: dir.join("pairs.csv"),
            detections: dir.join("detections.jsonl"),
        };
        fs::create_dir_all(&paths.packages)?;
        let mut meta = String::new();
        let mut truth = String::from("id,family\n");
        for e in &self.extensions {
            fs::write(paths.packages.join(format!("{}.crx", e.id)), e.package_bytes())?;
            meta.push_str(&serde_json::to_string(&e.record).expect("record serializes"));
            meta.push('\n');
            let _ = writeln!(truth, "{},{}", e.id, e.family.map_or("-", Family::name));
        }
        fs::write(&paths.metadata, meta)?;
        fs::write(&paths.truth, truth)?;
        let mut pairs = String::from("id_a,id_b,expected\n");
        for (a, b, x) in self.pairs(20, 20, DEFAULT_SEED) {
            let x = match x {
                Expectation::Similar => "similar",
                Expectation::Different => "different",
            };
            let _ = writeln!(pairs, "{a},{b},{x}");
        }
        fs::write(&paths.pairs, pairs)?;
        fs::write(&paths.detections, self.detection_reports())?;
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::is_valid_id;

    #[test]
    fn corpus_shape_and_validity() {
        let c = generate(DEFAULT_SEED);
        assert_eq!(c.extensions.len(), 6 * FAMILY_SIZE + SINGLETONS);
        let ids: std::collections::BTreeSet<_> = c.ids().into_iter().collect();
        assert_eq!(ids.len(), c.extensions.len());
        for e in &c.extensions {
            assert!(is_valid_id(&e.id));
            assert_eq!(e.record.violation(), None, "{}", e.id);
            assert!(e.record.removal_date.is_none_or(|r| r <= c.crawl_end));
        }
        assert_eq!(c.members(Family::EvalObfuscated)[0].hidden_calls.len(), 4);
    }

    #[test]
    fn deterministic() {
        let (a, b) = (generate(7), generate(7));
        assert_eq!(a.ids(), b.ids());
        assert_eq!(a.extensions[13].package_bytes(), b.extensions[13].package_bytes());
        assert_eq!(a.detection_reports(), b.detection_reports());
    }

    #[test]
    fn pair_sets() {
        let c = generate(DEFAULT_SEED);
        let p = c.pairs(20, 20, 1);
        assert_eq!(p.len(), 40);
        for (a, b, x) in &p {
            let same = c.family_of(a) == c.family_of(b);
            assert_eq!(same, *x == Expectation::Similar);
        }
        let reports = crate::analytics::parse_detection_reports(&c.detection_reports()).unwrap();
        assert!(!reports.is_empty());
    }
}
