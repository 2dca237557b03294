/// Extracts plain text from PDF bytes on a blocking thread. Panics inside the
/// PDF library are reported as errors.
pub async fn pdf_to_text(bytes: Vec<u8>) -> Result<String, String> {
    tokio::task::spawn_blocking(move || {
        std::panic::catch_unwind(|| pdf_extract::extract_text_from_mem(&bytes))
            .map_err(|_| "pdf parser panicked".to_string())?
            .map_err(|e| e.to_string())
    })
    .await
    .map_err(|e| e.to_string())?
}
