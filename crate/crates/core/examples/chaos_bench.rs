//! The full benchmark on a reduced configuration, written to a temporary
//! directory.
//!
//! ```text
//! cargo run --release --example chaos_bench [OUT_DIR]
//! ```

use mfchaos::bench::{run_bench, BenchContext};
use mfchaos::config::{Config, REFERENCE_TOML};

fn main() -> mfchaos::Result<()> {
    let out = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("mfchaos-bench"));
    let overrides = ["solver.q=24", "bench.n_list=[2, 4, 6]", "bench.emit_plots=true"].map(String::from);
    let cfg = Config::from_toml_str(REFERENCE_TOML, &overrides)?;
    let o = run_bench(&BenchContext::new(&cfg)?, &out)?;
    for w in &o.value.worst {
        println!("N = {}  sup gap {:.5}  M_N {:.4}", w.n, w.gap, w.m_n_hat);
    }
    for (name, c) in &o.summary.checks {
        println!("{name:<20} {}  {}", if c.pass { "PASS" } else { "FAIL" }, c.detail);
    }
    println!("tables in {}", out.display());
    Ok(())
}
