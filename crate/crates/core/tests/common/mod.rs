//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::path::Path;
use std::process::Output;
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use cmfseg::metrics::BinaryMask;
use cmfseg::synth::{Shape, SynthSpec};

/// Path of the compiled command-line binary.
pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cmfseg")
}

/// Run the binary with the given arguments and capture everything.
pub fn run(args: &[&str]) -> Output {
    std::process::Command::new(bin())
        .args(args)
        .output()
        .expect("failed to spawn the cmfseg binary")
}

pub fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Parse a "dice=<v> hd95=<v>" metrics line.
pub fn parse_metrics(line: &str) -> (f64, f64) {
    let mut dice = None;
    let mut hd95 = None;
    for token in line.split_whitespace() {
        if let Some(v) = token.strip_prefix("dice=") {
            dice = v.parse().ok();
        } else if let Some(v) = token.strip_prefix("hd95=") {
            hd95 = v.parse().ok();
        }
    }
    match (dice, hd95) {
        (Some(d), Some(h)) => (d, h),
        _ => panic!("no metrics in output line {line:?}"),
    }
}

/// Noisy disc image: 64x64, two to four bright discs (0.8) on a dark
/// background (0.2), noise sigma 0.1. Disc placement is a deterministic
/// function of the seed; discs never overlap or touch the border.
pub fn disc_suite_spec(seed: u64) -> SynthSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1000).wrapping_add(17));
    let count = 2 + (seed % 3) as usize;
    let mut discs: Vec<(f64, f64, f64)> = Vec::new();
    while discs.len() < count {
        let r = rng.gen_range(5.0..9.0);
        let ci = rng.gen_range(r + 2.0..62.0 - r);
        let cj = rng.gen_range(r + 2.0..62.0 - r);
        let disjoint = discs
            .iter()
            .all(|&(i, j, rr)| ((i - ci).powi(2) + (j - cj).powi(2)).sqrt() > r + rr + 2.0);
        if disjoint {
            discs.push((ci, cj, r));
        }
    }
    SynthSpec {
        width: 64,
        height: 64,
        shapes: discs
            .into_iter()
            .map(|(ci, cj, r)| Shape::Disc {
                center_i: ci,
                center_j: cj,
                radius: r,
                intensity: 0.8,
            })
            .collect(),
        background: 0.2,
        noise_sigma: 0.1,
        rng_seed: seed,
    }
}

/// Noisy two-region image: left half dark (0.2), right half bright (0.8).
pub fn two_region_spec(size: usize, sigma: f64, seed: u64) -> SynthSpec {
    SynthSpec {
        width: size,
        height: size,
        shapes: vec![Shape::Rect {
            top: 0,
            left: size / 2,
            height: size,
            width: size - size / 2,
            intensity: 0.8,
        }],
        background: 0.2,
        noise_sigma: sigma,
        rng_seed: seed,
    }
}

/// Defect-plate image: mid-gray background with dark pores and small bright
/// particles, moderate noise. Intensity clusters sit at 0.10 / 0.27 / 0.55 so
/// manual source levels partition it in genuinely different ways.
pub fn defect_spec() -> SynthSpec {
    let pores = [
        (20.0, 20.0, 5.0),
        (30.0, 70.0, 4.0),
        (55.0, 25.0, 6.0),
        (70.0, 60.0, 5.0),
        (85.0, 30.0, 4.0),
    ];
    let particles = [(15.0, 50.0, 3.0), (50.0, 50.0, 3.0), (76.0, 82.0, 3.0)];
    let mut shapes = Vec::new();
    for (ci, cj, r) in pores {
        shapes.push(Shape::Disc {
            center_i: ci,
            center_j: cj,
            radius: r,
            intensity: 0.10,
        });
    }
    for (ci, cj, r) in particles {
        shapes.push(Shape::Disc {
            center_i: ci,
            center_j: cj,
            radius: r,
            intensity: 0.55,
        });
    }
    SynthSpec {
        width: 96,
        height: 96,
        shapes,
        background: 0.27,
        noise_sigma: 0.08,
        rng_seed: 42,
    }
}

/// Append `synth` CLI arguments reproducing `spec` to `args`.
pub fn synth_args(spec: &SynthSpec, out_image: &Path, out_mask: Option<&Path>) -> Vec<String> {
    let mut args = vec![
        "synth".into(),
        "--width".into(),
        spec.width.to_string(),
        "--height".into(),
        spec.height.to_string(),
        "--background".into(),
        spec.background.to_string(),
        "--noise-sigma".into(),
        spec.noise_sigma.to_string(),
        "--rng-seed".into(),
        spec.rng_seed.to_string(),
    ];
    for shape in &spec.shapes {
        match *shape {
            Shape::Disc {
                center_i,
                center_j,
                radius,
                intensity,
            } => {
                args.push("--disc".into());
                args.push(format!("{center_i},{center_j},{radius},{intensity}"));
            }
            Shape::Rect {
                top,
                left,
                height,
                width,
                intensity,
            } => {
                args.push("--rect".into());
                args.push(format!("{top},{left},{height},{width},{intensity}"));
            }
        }
    }
    args.push("--out-image".into());
    args.push(out_image.display().to_string());
    if let Some(mask) = out_mask {
        args.push("--out-mask".into());
        args.push(mask.display().to_string());
    }
    args
}

/// Number of unequal 4-neighbor label pairs; a discrete boundary length.
pub fn boundary_transitions(mask: &BinaryMask) -> usize {
    let mut count = 0;
    for i in 0..mask.height() {
        for j in 0..mask.width() {
            if i + 1 < mask.height() && mask.is_set(i, j) != mask.is_set(i + 1, j) {
                count += 1;
            }
            if j + 1 < mask.width() && mask.is_set(i, j) != mask.is_set(i, j + 1) {
                count += 1;
            }
        }
    }
    count
}

/// Print one scoreboard line and fail the test when the check is not met.
pub fn criterion(name: &str, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] {name}: {detail}");
    assert!(ok, "{name}: {detail}");
}

/// As `criterion`, but a partial failure only warns.
pub fn criterion_with_warning(name: &str, ok: bool, warn: bool, detail: &str) {
    let tag = if !ok {
        "FAIL"
    } else if warn {
        "WARN"
    } else {
        "PASS"
    };
    println!("[{tag}] {name}: {detail}");
    assert!(ok, "{name}: {detail}");
}

/// Assert a wall-clock budget and return the elapsed seconds for reporting.
pub fn within(budget: Duration, start: Instant, what: &str) -> f64 {
    let elapsed = start.elapsed();
    assert!(
        elapsed <= budget,
        "{what} took {:.2} s, budget {:.2} s",
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    elapsed.as_secs_f64()
}
