//! Generation latency and peak heap usage versus table count.
//!
//! Peak memory comes from [`TrackingAllocator`] when the binary installs it
//! as the global allocator, otherwise from the process high-water mark.

use std::alloc::{GlobalAlloc, Layout, System};
use std::io::Write;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::time::Instant;

use serde::Serialize;

use crate::config::GenConfig;
use crate::error::{Error, Result};
use crate::generate::generate_database;
use crate::prior::Prior;
use crate::rng::split_seed;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);
static ACTIVE: AtomicBool = AtomicBool::new(false);

/// System allocator that tracks live and peak heap bytes.
///
/// ```ignore
/// #[global_allocator]
/// static ALLOC: relsynth::analysis::profile::TrackingAllocator =
///     relsynth::analysis::profile::TrackingAllocator;
/// ```
pub struct TrackingAllocator;

unsafe impl GlobalAlloc for TrackingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let ptr = unsafe { System.alloc(layout) };
        if !ptr.is_null() {
            record_alloc(layout.size());
        }
        ptr
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        let ptr = unsafe { System.alloc_zeroed(layout) };
        if !ptr.is_null() {
            record_alloc(layout.size());
        }
        ptr
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let out = unsafe { System.realloc(ptr, layout, new_size) };
        if !out.is_null() {
            CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
            record_alloc(new_size);
        }
        out
    }
}

#[inline]
fn record_alloc(size: usize) {
    ACTIVE.store(true, Ordering::Relaxed);
    let now = CURRENT.fetch_add(size, Ordering::Relaxed) + size;
    PEAK.fetch_max(now, Ordering::Relaxed);
}

/// True once any allocation went through [`TrackingAllocator`].
pub fn tracking_active() -> bool {
    ACTIVE.load(Ordering::Relaxed)
}

pub fn current_bytes() -> usize {
    CURRENT.load(Ordering::Relaxed)
}

pub fn peak_bytes() -> usize {
    PEAK.load(Ordering::Relaxed)
}

/// Restarts peak tracking from the current live size.
pub fn reset_peak() {
    PEAK.store(CURRENT.load(Ordering::Relaxed), Ordering::Relaxed);
}

/// Peak resident set size of the process (`VmHWM`), Linux only.
pub fn process_peak_rss() -> Option<usize> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: usize = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileRow {
    pub num_tables: usize,
    pub repeats: usize,
    pub latency_mean_s: f64,
    /// Sample standard deviation; 0 for a single repeat.
    pub latency_std_s: f64,
    pub peak_memory_gb: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Times single-threaded generation of databases with exactly `n` tables
/// for every `n` in `table_counts`. Repeat `k` uses seed `split(seed, k)`.
pub fn profile_generation(config: &GenConfig, table_counts: &[usize], repeats: usize, seed: u64) -> Result<Vec<ProfileRow>> {
    if repeats == 0 {
        return Err(Error::Usage("repeats must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(table_counts.len());
    for &n in table_counts {
        let config = GenConfig {
            num_tables: Prior::constant(n),
            ..config.clone()
        };
        let mut latencies = Vec::with_capacity(repeats);
        let mut peak = 0usize;
        for k in 0..repeats {
            reset_peak();
            let start = Instant::now();
            let db = generate_database(&config, split_seed(seed, k as u64))?;
            latencies.push(start.elapsed().as_secs_f64());
            drop(db);
            let used = if tracking_active() { peak_bytes() } else { process_peak_rss().unwrap_or(0) };
            peak = peak.max(used);
        }
        let (latency_mean_s, latency_std_s) = mean_std(&latencies);
        rows.push(ProfileRow {
            num_tables: n,
            repeats,
            latency_mean_s,
            latency_std_s,
            peak_memory_gb: peak as f64 / 1e9,
        });
    }
    Ok(rows)
}

/// CSV with columns `count,latency_s,latency_std_s,peak_memory_gb`.
pub fn write_profile_csv<W: Write>(rows: &[ProfileRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| Error::Usage(format!("cannot write profile: {e}"));
    w.write_record(["count", "latency_s", "latency_std_s", "peak_memory_gb"]).map_err(fail)?;
    for r in rows {
        w.write_record([
            r.num_tables.to_string(),
            format!("{:.6}", r.latency_mean_s),
            format!("{:.6}", r.latency_std_s),
            format!("{:.6}", r.peak_memory_gb),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(|e| Error::Usage(format!("cannot write profile: {e}")))
}
