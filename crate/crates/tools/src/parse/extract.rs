//! Main-content extraction from HTML.

use std::sync::Arc;

use ego_tree::NodeRef;
use scraper::{ElementRef, Html, Node, Selector};
use url::Url;
use xmaster_core::registry::Registry;

use crate::normalize::normalize_url;

/// Subtrees never treated as content.
const BOILERPLATE: &[&str] = &[
    "nav", "header", "footer", "aside", "script", "style", "noscript", "form", "template", "svg", "button", "iframe",
];

const BLOCKS: &[&str] = &[
    "p", "div", "section", "article", "main", "li", "ul", "ol", "h1", "h2", "h3", "h4", "h5", "h6", "br", "tr", "table",
    "blockquote", "pre", "figure", "figcaption", "dl", "dt", "dd", "td", "th", "body",
];

/// Minimum words for the main-content extractor to count as a success.
pub const MIN_MAIN_WORDS: usize = 25;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub url: String,
    pub anchor: String,
    /// Text of the nearest enclosing block.
    pub context: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extracted {
    pub text: String,
    pub links: Vec<Link>,
}

impl Extracted {
    pub fn words(&self) -> usize {
        self.text.split_whitespace().count()
    }
}

pub trait ContentExtractor: Send + Sync {
    fn name(&self) -> &str;

    /// `None` when this extractor finds no usable content.
    fn extract(&self, html: &str, base: &Url) -> Option<Extracted>;
}

/// `<article>`, `<main>` or `[role=main]`, minus boilerplate.
pub struct MainContent;

impl ContentExtractor for MainContent {
    fn name(&self) -> &str {
        "main-content"
    }

    fn extract(&self, html: &str, base: &Url) -> Option<Extracted> {
        let doc = Html::parse_document(html);
        for sel in ["article", "main", "[role=main]"] {
            let sel = Selector::parse(sel).expect("static selector");
            if let Some(root) = doc.select(&sel).next() {
                let out = from_root(root, base);
                if out.words() >= MIN_MAIN_WORDS {
                    return Some(out);
                }
            }
        }
        None
    }
}

/// The block with the most paragraph text directly under it.
pub struct DensestBlock;

impl ContentExtractor for DensestBlock {
    fn name(&self) -> &str {
        "densest-block"
    }

    fn extract(&self, html: &str, base: &Url) -> Option<Extracted> {
        let doc = Html::parse_document(html);
        let sel = Selector::parse("body, div, section, td, article, main").expect("static selector");
        let mut best: Option<(usize, ElementRef)> = None;
        for el in doc.select(&sel) {
            if in_boilerplate(*el) {
                continue;
            }
            let score = direct_text_len(el);
            if score > best.map_or(0, |b| b.0) {
                best = Some((score, el));
            }
        }
        let out = from_root(best?.1, base);
        (out.words() > 0).then_some(out)
    }
}

pub type ExtractorRegistry = Registry<dyn ContentExtractor, ()>;

pub fn default_content_extractors() -> ExtractorRegistry {
    let mut reg = ExtractorRegistry::new("content extractor");
    reg.register("main-content", |_: &()| Ok(Arc::new(MainContent) as Arc<dyn ContentExtractor>));
    reg.register("densest-block", |_: &()| Ok(Arc::new(DensestBlock) as Arc<dyn ContentExtractor>));
    reg
}

fn name_of(node: NodeRef<'_, Node>) -> Option<&str> {
    match node.value() {
        Node::Element(e) => Some(e.name()),
        _ => None,
    }
}

fn in_boilerplate(node: NodeRef<Node>) -> bool {
    std::iter::once(node)
        .chain(node.ancestors())
        .any(|n| name_of(n).is_some_and(|name| BOILERPLATE.contains(&name)))
}

/// Characters of text in direct text children and direct paragraph-like
/// children.
fn direct_text_len(el: ElementRef) -> usize {
    el.children()
        .map(|c| match c.value() {
            Node::Text(t) => t.trim().len(),
            Node::Element(e) if matches!(e.name(), "p" | "pre" | "blockquote" | "h1" | "h2" | "h3") => {
                ElementRef::wrap(c).map_or(0, |p| collapse(&p.text().collect::<String>()).len())
            }
            _ => 0,
        })
        .sum()
}

fn from_root(root: ElementRef, base: &Url) -> Extracted {
    let mut raw = String::new();
    let mut links = Vec::new();
    walk(*root, base, &mut raw, &mut links);
    let text = raw
        .lines()
        .map(collapse)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n");
    Extracted { text, links }
}

fn walk(node: NodeRef<Node>, base: &Url, out: &mut String, links: &mut Vec<Link>) {
    match node.value() {
        Node::Text(t) => out.push_str(t),
        Node::Element(e) => {
            let name = e.name();
            if BOILERPLATE.contains(&name) {
                return;
            }
            let block = BLOCKS.contains(&name);
            if block {
                out.push('\n');
            }
            if name == "a" {
                if let Some(link) = e.attr("href").and_then(|h| make_link(node, h, base)) {
                    links.push(link);
                }
            }
            for c in node.children() {
                walk(c, base, out, links);
            }
            if block {
                out.push('\n');
            }
        }
        _ => {
            for c in node.children() {
                walk(c, base, out, links);
            }
        }
    }
}

fn make_link(node: NodeRef<Node>, href: &str, base: &Url) -> Option<Link> {
    let url = normalize_url(base.join(href.trim()).ok()?.as_str())?;
    let anchor = ElementRef::wrap(node).map(|a| collapse(&a.text().collect::<String>()))?;
    let context = node
        .ancestors()
        .find(|n| name_of(*n).is_some_and(|name| BLOCKS.contains(&name) && name != "br"))
        .and_then(ElementRef::wrap)
        .map(|b| collapse(&b.text().collect::<String>()))
        .unwrap_or_default();
    Some(Link { url, anchor, context })
}

pub(crate) fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
