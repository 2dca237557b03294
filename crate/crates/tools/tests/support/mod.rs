//! A local stand-in for the web: article pages, an ar5iv/arXiv look-alike,
//! generated PDFs, a robots.txt and a serper-compatible search endpoint.
//! Fixture host names resolve to this server through reqwest overrides.
#![allow(dead_code)]

pub mod oracle;

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lopdf::content::{Content, Operation};
use lopdf::{dictionary, Document, Object, Stream};
use serde_json::{json, Value};
use xmaster_tools::parse::FetchConfig;
use xmaster_tools::search::SearchProviderConfig;
use xmaster_tools::{Mode, ToolConfig};

pub const SITE: &str = "fixtures.test";
pub const AR5IV: &str = "ar5iv.fixture.test";
pub const ARXIV: &str = "arxiv.fixture.test";
pub const SERP: &str = "serp.fixture.test";
pub const KEY: &str = "fixture-key";

#[derive(Default)]
pub struct Counters {
    pub hits: AtomicUsize,
    pub in_flight: AtomicUsize,
    pub max_in_flight: AtomicUsize,
    pub search_calls: AtomicUsize,
}

pub struct FixtureWeb {
    pub addr: SocketAddr,
    pub counters: Arc<Counters>,
}

impl FixtureWeb {
    pub async fn start() -> Self {
        let counters = Arc::new(Counters::default());
        let app = Router::new()
            .route("/robots.txt", get(|| async { "User-agent: *\nDisallow: /private/\n" }))
            .route("/article.html", get(|| async { html(ARTICLE) }))
            .route("/nav-heavy.html", get(|| async { html(NAV_HEAVY) }))
            .route("/private/{page}", get(|| async { html(ARTICLE) }))
            .route("/papers/report.pdf", get(|| async { pdf(&report_lines()) }))
            .route("/html/{id}", get(ar5iv))
            .route("/abs/{id}", get(abs))
            .route("/pdf/{id}", get(arxiv_pdf))
            .route("/slow/{n}", get(slow))
            .route("/search", post(serp))
            .with_state(counters.clone());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
        Self { addr, counters }
    }

    /// A service config whose fetches and searches all land on this server.
    pub fn config(&self, mode: Mode) -> ToolConfig {
        ToolConfig {
            mode,
            search: SearchProviderConfig {
                base_url: Some(format!("http://{SERP}")),
                api_key: Some(KEY.into()),
                timeout: Duration::from_secs(10),
                retries: 2,
                resolve: vec![(SERP.to_string(), self.addr)],
                ..SearchProviderConfig::default()
            },
            fetch: FetchConfig {
                timeout: Duration::from_secs(10),
                resolve: [SITE, AR5IV, ARXIV, SERP]
                    .into_iter()
                    .map(|h| (h.to_string(), self.addr))
                    .collect(),
                ..FetchConfig::default()
            },
            ar5iv_base: format!("http://{AR5IV}"),
            arxiv_base: format!("http://{ARXIV}"),
            ..ToolConfig::default()
        }
    }
}

fn html(body: &'static str) -> Response {
    ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], body).into_response()
}

fn owned_html(body: String) -> Response {
    ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], body).into_response()
}

async fn ar5iv(Path(id): Path<String>) -> Response {
    match id.as_str() {
        "2401.00001" => owned_html(paper_html("Sparse Mixtures for Long Context Retrieval", 90)),
        "2401.00002" => owned_html(paper_html("Calibrated Judges for Open Ended Answers", 6)),
        _ => (StatusCode::NOT_FOUND, "not found").into_response(),
    }
}

async fn abs(Path(id): Path<String>) -> Response {
    owned_html(format!(
        "<html><head><title>{id}</title></head><body><h1>Abstract page for {id}</h1></body></html>"
    ))
}

async fn arxiv_pdf(Path(id): Path<String>) -> Response {
    match id.as_str() {
        "2401.00002" => pdf(&paper_lines("Calibrated Judges for Open Ended Answers", 40)),
        "2401.00003" => pdf(&paper_lines("Tool Use Traces in Scientific Question Answering", 40)),
        _ => (StatusCode::NOT_FOUND, "not found").into_response(),
    }
}

async fn slow(State(c): State<Arc<Counters>>, Path(n): Path<String>) -> Response {
    c.hits.fetch_add(1, Ordering::SeqCst);
    let now = c.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    c.max_in_flight.fetch_max(now, Ordering::SeqCst);
    tokio::time::sleep(Duration::from_millis(150)).await;
    c.in_flight.fetch_sub(1, Ordering::SeqCst);
    owned_html(format!(
        "<html><body><article><p>Slow page {n}. {}</p></article></body></html>",
        "Filler words keep the extractor satisfied with enough text. ".repeat(5)
    ))
}

async fn serp(State(c): State<Arc<Counters>>, headers: HeaderMap, Json(body): Json<Value>) -> Response {
    c.search_calls.fetch_add(1, Ordering::SeqCst);
    if headers.get("x-api-key").and_then(|v| v.to_str().ok()) != Some(KEY) {
        return (StatusCode::UNAUTHORIZED, "bad key").into_response();
    }
    let q = body["q"].as_str().unwrap_or_default().to_lowercase();
    if q.contains("quota") {
        return (StatusCode::TOO_MANY_REQUESTS, "slow down").into_response();
    }
    if q.contains("outage") {
        return (StatusCode::SERVICE_UNAVAILABLE, "down").into_response();
    }
    Json(serp_body(&q)).into_response()
}

fn serp_body(q: &str) -> Value {
    if q.contains("ripgrep") {
        return json!({
            "searchParameters": {"q": q},
            "knowledgeGraph": {
                "title": "ripgrep",
                "type": "Software",
                "description": "ripgrep is a line-oriented search tool that recursively searches directories for a regex pattern.",
                "attributes": {"Written in": "Rust", "License": "MIT or Unlicense", "Initial release": "2016"}
            },
            "organic": [
                {"title": "BurntSushi/ripgrep - GitHub", "link": "https://github.com/BurntSushi/ripgrep", "snippet": "ripgrep recursively searches directories for a regex pattern while respecting your gitignore.", "position": 1},
                {"title": "ripgrep - crates.io", "link": "https://crates.io/crates/ripgrep?utm_source=serp", "snippet": "Line-oriented search tool.", "position": 2},
                {"title": "ripgrep is faster than grep, ag, git grep", "link": "https://blog.burntsushi.net/ripgrep/", "snippet": "A long benchmark write-up.", "position": 3}
            ],
            "relatedSearches": [{"query": "ripgrep vs grep"}, {"query": "ripgrep install"}]
        });
    }
    if q.contains("rust programming language") {
        return json!({
            "knowledgeGraph": {
                "title": "Rust",
                "type": "Programming language",
                "description": "Rust is a general-purpose programming language emphasizing performance, type safety and concurrency.",
                "attributes": {"Designed by": "Graydon Hoare", "First appeared": "2010", "Typing discipline": "Affine, inferred, nominal, static, strong"}
            },
            "organic": [
                {"title": "Rust Programming Language", "link": "https://www.rust-lang.org/", "snippet": "A language empowering everyone to build reliable and efficient software."},
                {"title": "Rust (programming language) - Wikipedia", "link": "https://en.wikipedia.org/wiki/Rust_(programming_language)", "snippet": "Rust is a general-purpose programming language."},
                {"title": "The Rust Programming Language - The Book", "link": "https://doc.rust-lang.org/book/", "snippet": "An introductory book about Rust."}
            ],
            "relatedSearches": [{"query": "rust vs c++"}, {"query": "learn rust"}]
        });
    }
    if q.contains("tidal locking") {
        return json!({
            "organic": [
                {"title": "Tidal locking - Wikipedia", "link": "https://en.wikipedia.org/wiki/Tidal_locking?utm_source=serp&utm_medium=organic", "snippet": "Tidal locking between a pair of co-orbiting astronomical bodies occurs when one of the objects reaches a state where there is no longer any net change in its rotation rate."},
                {"title": "Tidal locking - Wikipedia (mobile)", "link": "https://en.wikipedia.org/wiki/Tidal_locking?fbclid=abc123", "snippet": "Duplicate after tracking parameters are removed."},
                {"title": "Why does the Moon always show the same face?", "link": "https://science.example.org/moon-face#:~:text=same%20face", "snippet": "The Moon rotates once per orbit."},
                {"title": "Broken result", "link": "javascript:void(0)", "snippet": "Not a web page."}
            ],
            "relatedSearches": [{"query": "is earth tidally locked to the sun"}, {"query": ""}]
        });
    }
    let organic: Vec<Value> = (1..=15)
        .map(|i| json!({"title": format!("Result {i}"), "link": format!("https://example.org/result/{i}"), "snippet": format!("Snippet number {i} for {q}.")}))
        .collect();
    json!({ "organic": organic })
}

const ARTICLE: &str = r##"<!doctype html>
<html><head><title>Tidal locking explained</title></head>
<body id="top">
<header><a href="http://fixtures.test/">Fixture Science</a></header>
<nav><a href="http://fixtures.test/about.html">About</a> <a href="http://fixtures.test/contact.html">Contact</a></nav>
<article>
<h1>Tidal locking explained</h1>
<p>A body becomes tidally locked when its rotation period matches its orbital period, so the same hemisphere
always faces its partner. Tidal bulges raised by gravity lag behind the line between the two bodies and the
resulting torque slowly drains rotational energy. See <a href="https://en.wikipedia.org/wiki/Tidal_locking?utm_source=fixture">the encyclopedia entry on tidal locking</a> for the full derivation.</p>
<p>The Moon is the familiar example: it rotates once per orbit, which is why we only ever see one face of it.
<a href="http://fixtures.test/moon.html">Our notes on the Moon</a> cover libration, the small wobble that lets observers see slightly more than half of the surface.</p>
<p>Pluto and Charon are mutually locked, each keeping the same face toward the other, as described in
<a href="https://science.nasa.gov/dwarf-planets/pluto/">the mission overview for Pluto</a>.</p>
<p><a href="#top">Back to top</a></p>
</article>
<footer>Fixture Science, all rights reserved.</footer>
</body></html>
"##;

const NAV_HEAVY: &str = r##"<!doctype html>
<html><head><title>Reef watch</title></head>
<body>
<div class="menu"><a href="/a">Home</a> <a href="/b">News</a> <a href="/c">Data</a> <a href="/d">Maps</a> <a href="/e">Team</a></div>
<div class="content">
<p>Coral bleaching happens when water temperature stays roughly one degree Celsius above the usual summer maximum
for several weeks. Stressed corals expel the symbiotic algae that give them color and most of their food.</p>
<p>Reef monitors track degree heating weeks, a running sum of temperature anomalies, to forecast bleaching.
Readings above four degree heating weeks usually mean significant bleaching; above eight, widespread mortality.
The <a href="https://coralreefwatch.example.gov/product/5km/">satellite monitoring product</a> publishes these values daily.</p>
<p>Recovery takes years when temperatures fall back in time, and many reefs never regain their former cover.</p>
</div>
<div class="sidebar"><p>Sponsored.</p><a href="/f">Shop</a></div>
</body></html>
"##;

const PAPER_SENTENCES: &[&str] = &[
    "We study retrieval over very long contexts with sparse expert routing.",
    "Each layer routes a token to two of sixteen experts chosen by a learned gate.",
    "The retrieval benchmark contains questions whose answers are spread across many documents.",
    "Our judge model compares the predicted answer with the reference and explains its decision.",
    "Calibration error drops when the judge sees the question, the response and the gold answer together.",
    "Tool calls are written as short code snippets and executed in an isolated interpreter.",
    "Execution results are fed back into the reasoning trace before generation continues.",
    "Ablations show that removing the critic lowers accuracy on multi-step physics questions.",
    "We report mean accuracy over three independent runs with different sampling seeds.",
    "Error analysis finds that most failures come from unit conversions and misread tables.",
];

fn paper_text(title: &str, paragraphs: usize) -> Vec<String> {
    (0..paragraphs)
        .map(|p| {
            (0..4)
                .map(|s| PAPER_SENTENCES[(p * 3 + s) % PAPER_SENTENCES.len()])
                .collect::<Vec<_>>()
                .join(" ")
        })
        .map(|para| format!("{para} ({title})"))
        .collect()
}

fn paper_html(title: &str, paragraphs: usize) -> String {
    let body: String = paper_text(title, paragraphs)
        .into_iter()
        .enumerate()
        .map(|(i, p)| format!("<p id=\"p{i}\">{p}</p>\n"))
        .collect();
    format!(
        r#"<!doctype html><html><head><title>{title}</title></head><body>
<nav class="ltx_page_navbar"><a href="http://{AR5IV}/">ar5iv</a></nav>
<article class="ltx_document"><h1 class="ltx_title">{title}</h1>
<section class="ltx_section">{body}</section>
<section class="ltx_bibliography"><p>Related work: <a href="https://example.org/related-paper">a related paper on routing</a>.</p></section>
</article></body></html>"#
    )
}

fn paper_lines(title: &str, paragraphs: usize) -> Vec<String> {
    let mut lines = vec![title.to_string()];
    for p in paper_text(title, paragraphs) {
        let mut line = String::new();
        for w in p.split_whitespace() {
            if line.len() + w.len() > 80 {
                lines.push(std::mem::take(&mut line));
            }
            if !line.is_empty() {
                line.push(' ');
            }
            line.push_str(w);
        }
        lines.push(line);
    }
    lines
}

fn report_lines() -> Vec<String> {
    paper_lines("Annual Report on Reef Temperature Anomalies", 12)
}

/// A plain PDF with one Helvetica text line per entry, 50 lines per page.
pub fn pdf(lines: &[String]) -> Response {
    ([(header::CONTENT_TYPE, "application/pdf")], pdf_bytes(lines)).into_response()
}

pub fn pdf_bytes(lines: &[String]) -> Vec<u8> {
    let mut doc = Document::with_version("1.5");
    let pages_id = doc.new_object_id();
    let font_id = doc.add_object(dictionary! {
        "Type" => "Font",
        "Subtype" => "Type1",
        "BaseFont" => "Helvetica",
        "Encoding" => "WinAnsiEncoding",
    });
    let resources_id = doc.add_object(dictionary! {
        "Font" => dictionary! { "F1" => font_id },
    });
    let mut kids = Vec::new();
    for chunk in lines.chunks(50) {
        let mut ops = vec![
            Operation::new("BT", vec![]),
            Operation::new("Tf", vec!["F1".into(), 10.into()]),
            Operation::new("TL", vec![14.into()]),
            Operation::new("Td", vec![50.into(), 790.into()]),
        ];
        for line in chunk {
            ops.push(Operation::new("Tj", vec![Object::string_literal(line.as_str())]));
            ops.push(Operation::new("T*", vec![]));
        }
        ops.push(Operation::new("ET", vec![]));
        let content = Content { operations: ops };
        let content_id = doc.add_object(Stream::new(dictionary! {}, content.encode().unwrap()));
        let page_id = doc.add_object(dictionary! {
            "Type" => "Page",
            "Parent" => pages_id,
            "Contents" => content_id,
        });
        kids.push(page_id.into());
    }
    let count = kids.len() as i64;
    doc.objects.insert(
        pages_id,
        Object::Dictionary(dictionary! {
            "Type" => "Pages",
            "Kids" => kids,
            "Count" => count,
            "Resources" => resources_id,
            "MediaBox" => vec![0.into(), 0.into(), 595.into(), 842.into()],
        }),
    );
    let catalog_id = doc.add_object(dictionary! { "Type" => "Catalog", "Pages" => pages_id });
    doc.trailer.set("Root", catalog_id);
    let mut out = Vec::new();
    doc.save_to(&mut out).unwrap();
    out
}

/// One request per fixture cassette, with its file label.
pub fn cassette_requests() -> Vec<(&'static str, xmaster_tools::ToolRequest)> {
    use xmaster_tools::{ParseMode, ParseRequest, SearchRequest, ToolRequest};
    let search = |q: &str, k| ToolRequest::Search(SearchRequest { query: q.into(), top_k: k });
    let parse = |u: &str, q: &str, mode| {
        ToolRequest::Parse(ParseRequest {
            url: u.into(),
            query: q.into(),
            mode,
        })
    };
    vec![
        ("search-entity-facts", search("Rust programming language", 10)),
        ("github-repo-query", search("ripgrep github repository", 5)),
        ("search-no-entity-facts", search("tidal locking moon", 10)),
        ("search-top-k-3", search("best hiking trails near lakes", 3)),
        (
            "parse-general-article",
            parse("http://fixtures.test/article.html", "Why does the Moon show one face?", ParseMode::General),
        ),
        (
            "parse-general-fallback",
            parse("http://fixtures.test/nav-heavy.html", "coral bleaching temperature threshold", ParseMode::Auto),
        ),
        (
            "parse-paper-html",
            parse("http://arxiv.fixture.test/abs/2401.00001", "how are experts routed", ParseMode::Auto),
        ),
        (
            "parse-paper-short-html-pdf",
            parse("http://arxiv.fixture.test/abs/2401.00002", "judge calibration error", ParseMode::Auto),
        ),
        (
            "parse-paper-missing-html-pdf",
            parse("http://arxiv.fixture.test/abs/2401.00003", "tool calls executed", ParseMode::Paper),
        ),
        (
            "parse-direct-pdf",
            parse("http://fixtures.test/papers/report.pdf", "reef temperature", ParseMode::Auto),
        ),
        (
            "parse-robots-disallowed",
            parse("http://fixtures.test/private/notes.html", "anything", ParseMode::General),
        ),
        (
            "parse-missing-page",
            parse("http://fixtures.test/missing.html", "anything", ParseMode::General),
        ),
    ]
}
