//! CSV and JSON emission. All numbers go out with 12 significant digits so
//! repeated runs on the same build are byte-identical.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

/// 12 significant digits, locale-free.
pub fn fmt12(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    format!("{:.11e}", v)
}

pub fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::with_capacity(rows.len() * 64 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            out.push_str(&fmt12(*v));
            first = false;
        }
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).context("serialize JSON")?;
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Deterministic parallel map: the worker count is capped by the
/// `SL_LAB_THREADS` environment variable, results keep input order.
pub fn parallel_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send + Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let max_threads = std::env::var("SL_LAB_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
    let workers = max_threads.min(items.len()).max(1);
    if workers == 1 {
        return items.iter().map(|t| f(t)).collect();
    }
    let mut results: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results_mutex = std::sync::Mutex::new(&mut results);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if idx >= items.len() {
                    break;
                }
                let r = f(&items[idx]);
                results_mutex.lock().unwrap()[idx] = Some(r);
            });
        }
    });
    results.into_iter().map(|r| r.unwrap()).collect()
}
