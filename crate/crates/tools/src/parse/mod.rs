//! Web page and paper parsing.

mod extract;
mod fetch;
mod pdf;

pub use extract::{
    default_content_extractors, ContentExtractor, DensestBlock, Extracted, ExtractorRegistry, Link, MainContent,
    MIN_MAIN_WORDS,
};
pub use fetch::{FetchConfig, FetchError, Fetched, Fetcher};
pub use pdf::pdf_to_text;

use std::collections::HashSet;
use std::sync::{Arc, LazyLock};

use regex::Regex;
use scraper::{Html, Selector};
use url::Url;

use crate::error::ToolError;
use crate::normalize::normalize_url;
use crate::relevance::RelevanceExtractor;
use crate::types::{Diagnostics, ParseMode, ParseResponse, Strategy, Subpage};

/// HTML renderings with fewer words fall back to the PDF.
pub const MIN_PAPER_WORDS: usize = 500;
pub const MAX_SUBPAGES: usize = 30;
pub const CONTEXT_CHARS: usize = 140;

const PAPER_HOSTS: &[&str] = &["arxiv", "ar5iv", "doi.org", "biorxiv", "medrxiv", "openreview", "semanticscholar"];

static DOI: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"10\.\d{4,9}/").expect("static regex"));
static ARXIV_ID: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^/(?:abs|pdf|html)/([a-z\-]+(?:\.[A-Z]{2})?/\d{7}|\d{4}\.\d{4,5})(v\d+)?(?:\.pdf)?/?$").expect("static regex")
});

/// Paper for preprint and publisher hosts, DOI paths and `.pdf` files.
pub fn classify(url: &Url) -> ParseMode {
    let host = url.host_str().unwrap_or_default().to_ascii_lowercase();
    let path = url.path().to_ascii_lowercase();
    if PAPER_HOSTS.iter().any(|h| host.contains(h)) || path.ends_with(".pdf") || DOI.is_match(url.path()) {
        ParseMode::Paper
    } else {
        ParseMode::General
    }
}

/// The arXiv identifier (with version, if any) of an arXiv or ar5iv URL.
pub fn arxiv_id(url: &Url) -> Option<String> {
    let host = url.host_str()?.to_ascii_lowercase();
    if !(host.contains("arxiv") || host.contains("ar5iv")) {
        return None;
    }
    let caps = ARXIV_ID.captures(url.path())?;
    Some(format!("{}{}", &caps[1], caps.get(2).map_or("", |m| m.as_str())))
}

/// Everything a parse needs besides the request.
pub struct ParseContext<'a> {
    pub fetcher: &'a Fetcher,
    pub extractors: &'a [Arc<dyn ContentExtractor>],
    pub relevance: &'a dyn RelevanceExtractor,
    pub ar5iv_base: &'a str,
    pub arxiv_base: &'a str,
}

pub async fn parse(ctx: &ParseContext<'_>, url: &str, query: &str, mode: ParseMode) -> Result<ParseResponse, ToolError> {
    let source = normalize_url(url).ok_or_else(|| ToolError::InvalidRequest(format!("not an http(s) URL: {url:?}")))?;
    let parsed = Url::parse(&source).map_err(|e| ToolError::InvalidRequest(e.to_string()))?;
    let mode = match mode {
        ParseMode::Auto => classify(&parsed),
        m => m,
    };
    let mut diag = Diagnostics::default();
    let (strategy, content) = match mode {
        ParseMode::Paper => paper(ctx, &parsed, &mut diag).await?,
        _ => (Strategy::GeneralPage, general(ctx, &parsed, &mut diag).await?),
    };
    let relevant_passages = ctx.relevance.extract(&content.text, query).await;
    Ok(ParseResponse {
        subpages: subpages(&content.links, &source),
        source_url: source,
        strategy,
        relevant_passages,
        fetch_diagnostics: diag,
    })
}

fn fetch_error(url: &Url, diag: &Diagnostics, robots: bool) -> ToolError {
    if robots {
        ToolError::RobotsDisallowed(url.to_string())
    } else {
        ToolError::FetchFailed {
            url: url.to_string(),
            diagnostics: diag.clone(),
        }
    }
}

/// Runs the extractors in order, recording each outcome.
fn extract_with(ctx: &ParseContext<'_>, html: &str, base: &Url, diag: &mut Diagnostics) -> Option<Extracted> {
    for ex in ctx.extractors {
        match ex.extract(html, base) {
            Some(out) => {
                diag.record(&format!("extract:{}", ex.name()), format!("ok ({} words)", out.words()));
                return Some(out);
            }
            None => diag.record(&format!("extract:{}", ex.name()), "no content"),
        }
    }
    None
}

async fn general(ctx: &ParseContext<'_>, url: &Url, diag: &mut Diagnostics) -> Result<Extracted, ToolError> {
    let page = match ctx.fetcher.get(url.as_str()).await {
        Ok(p) if p.ok() => {
            diag.record("fetch", format!("status {}", p.status));
            p
        }
        Ok(p) => {
            diag.record("fetch", format!("status {}", p.status));
            return Err(fetch_error(url, diag, false));
        }
        Err(e) => {
            diag.record("fetch", e.to_string());
            return Err(fetch_error(url, diag, e == FetchError::Robots));
        }
    };
    let base = Url::parse(&page.url).unwrap_or_else(|_| url.clone());
    if page.is_pdf() {
        return pdf_content(page.body, diag, "pdf").await.ok_or_else(|| ToolError::ContentEmpty(url.to_string()));
    }
    extract_with(ctx, &page.text(), &base, diag).ok_or_else(|| ToolError::ContentEmpty(url.to_string()))
}

async fn pdf_content(bytes: Vec<u8>, diag: &mut Diagnostics, method: &str) -> Option<Extracted> {
    match pdf_to_text(bytes).await {
        Ok(text) => {
            let text = text
                .lines()
                .map(extract::collapse)
                .filter(|l| !l.is_empty())
                .collect::<Vec<_>>()
                .join("\n");
            let words = text.split_whitespace().count();
            if words == 0 {
                diag.record(method, "no text in pdf");
                return None;
            }
            diag.record(method, format!("ok ({words} words)"));
            Some(Extracted { text, links: Vec::new() })
        }
        Err(e) => {
            diag.record(method, format!("pdf extraction failed: {e}"));
            None
        }
    }
}

/// HTML rendering first; the PDF when that fails or is incomplete. An
/// incomplete rendering is still returned if the PDF cannot be had.
async fn paper(ctx: &ParseContext<'_>, url: &Url, diag: &mut Diagnostics) -> Result<(Strategy, Extracted), ToolError> {
    let id = arxiv_id(url);
    let direct_pdf = url.path().to_ascii_lowercase().ends_with(".pdf");
    let mut robots_only = true;
    let mut partial: Option<Extracted> = None;
    let mut pdf_link: Option<String> = None;

    let html_url = match &id {
        Some(id) => Some(format!("{}/html/{id}", ctx.ar5iv_base.trim_end_matches('/'))),
        None if direct_pdf => None,
        None => Some(url.to_string()),
    };
    match html_url {
        None => diag.record("html", "skipped (direct pdf link)"),
        Some(html_url) => match ctx.fetcher.get(&html_url).await {
            Ok(page) if page.ok() && !page.is_pdf() => {
                robots_only = false;
                let base = Url::parse(&page.url).unwrap_or_else(|_| url.clone());
                let html = page.text();
                pdf_link = find_pdf_link(&html, &base);
                let mut sub = Diagnostics::default();
                let out = extract_with(ctx, &html, &base, &mut sub);
                let words = out.as_ref().map_or(0, Extracted::words);
                if words >= MIN_PAPER_WORDS {
                    diag.record("html", format!("ok ({words} words)"));
                    return Ok((Strategy::PaperHtml, out.expect("words > 0")));
                }
                diag.record("html", format!("incomplete ({words} words)"));
                partial = out;
            }
            Ok(page) if page.ok() => {
                diag.record("html", "got a pdf instead of html");
                if let Some(out) = pdf_content(page.body, diag, "pdf").await {
                    return Ok((Strategy::PaperPdf, out));
                }
                return Err(fetch_error(url, diag, false));
            }
            Ok(page) => {
                robots_only = false;
                diag.record("html", format!("status {}", page.status));
            }
            Err(e) => {
                robots_only &= e == FetchError::Robots;
                diag.record("html", e.to_string());
            }
        },
    }

    let pdf_url = match &id {
        Some(id) => Some(format!("{}/pdf/{id}", ctx.arxiv_base.trim_end_matches('/'))),
        None if direct_pdf => Some(url.to_string()),
        None => pdf_link,
    };
    let Some(pdf_url) = pdf_url else {
        diag.record("pdf", "no pdf link found");
        return match partial {
            Some(p) if p.words() > 0 => Ok((Strategy::PaperHtml, p)),
            _ => Err(fetch_error(url, diag, false)),
        };
    };
    match ctx.fetcher.get(&pdf_url).await {
        Ok(file) if file.ok() => {
            if let Some(out) = pdf_content(file.body, diag, "pdf").await {
                return Ok((Strategy::PaperPdf, out));
            }
            robots_only = false;
        }
        Ok(file) => {
            robots_only = false;
            diag.record("pdf", format!("status {}", file.status));
        }
        Err(e) => {
            robots_only &= e == FetchError::Robots;
            diag.record("pdf", e.to_string());
        }
    }
    match partial {
        Some(p) if p.words() > 0 => Ok((Strategy::PaperHtml, p)),
        _ => Err(fetch_error(url, diag, robots_only)),
    }
}

/// `citation_pdf_url` meta tag, else the first link to a `.pdf`.
fn find_pdf_link(html: &str, base: &Url) -> Option<String> {
    let doc = Html::parse_document(html);
    let meta = Selector::parse(r#"meta[name="citation_pdf_url"]"#).expect("static selector");
    if let Some(u) = doc
        .select(&meta)
        .filter_map(|m| m.value().attr("content"))
        .find_map(|c| base.join(c).ok())
    {
        return Some(u.to_string());
    }
    let links = Selector::parse("a[href]").expect("static selector");
    doc.select(&links)
        .filter_map(|a| base.join(a.value().attr("href")?).ok())
        .find(|u| u.path().to_ascii_lowercase().ends_with(".pdf"))
        .map(|u| u.to_string())
}

/// Unique outbound links, excluding the page itself, each described by its
/// anchor text and up to [`CONTEXT_CHARS`] characters of surrounding text.
pub fn subpages(links: &[Link], page_url: &str) -> Vec<Subpage> {
    let own = strip_fragment(page_url);
    let mut seen = HashSet::new();
    links
        .iter()
        .filter(|l| strip_fragment(&l.url) != own && seen.insert(strip_fragment(&l.url)))
        .take(MAX_SUBPAGES)
        .map(|l| Subpage {
            url: l.url.clone(),
            brief_description: describe(l),
        })
        .collect()
}

fn strip_fragment(u: &str) -> String {
    u.split('#').next().unwrap_or(u).to_string()
}

fn describe(link: &Link) -> String {
    let context: String = link.context.chars().take(CONTEXT_CHARS).collect();
    let anchor = if link.anchor.is_empty() { link.url.as_str() } else { link.anchor.as_str() };
    if context.is_empty() || link.context == link.anchor {
        anchor.to_string()
    } else {
        format!("{anchor}: {context}")
    }
}
