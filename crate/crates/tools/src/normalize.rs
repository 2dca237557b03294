//! URL clean-up for search results and request hashing.

use url::Url;

const TRACKING_PARAMS: &[&str] = &[
    "gclid", "gclsrc", "dclid", "fbclid", "msclkid", "yclid", "igshid", "mc_cid", "mc_eid", "_ga", "_gl", "ref_src",
    "ref_url", "srsltid", "si", "spm", "zanpid", "oly_enc_id", "oly_anon_id", "vero_id", "wickedid",
];

fn is_tracking(key: &str) -> bool {
    let k = key.to_ascii_lowercase();
    k.starts_with("utm_") || k.starts_with("pk_") || TRACKING_PARAMS.contains(&k.as_str())
}

/// Parses `raw` as an absolute http(s) URL and strips tracking query
/// parameters and text-fragment directives. Returns `None` for anything else.
pub fn normalize_url(raw: &str) -> Option<String> {
    let mut url = Url::parse(raw.trim()).ok()?;
    if !matches!(url.scheme(), "http" | "https") || url.host_str().is_none() {
        return None;
    }
    let kept: Vec<(String, String)> = url
        .query_pairs()
        .filter(|(k, _)| !is_tracking(k))
        .map(|(k, v)| (k.into_owned(), v.into_owned()))
        .collect();
    if kept.is_empty() {
        url.set_query(None);
    } else {
        url.query_pairs_mut().clear().extend_pairs(kept);
    }
    if url.fragment().is_some_and(|f| f.starts_with(":~:") || f.is_empty()) {
        url.set_fragment(None);
    }
    Some(url.to_string())
}
