//! Fits the noise scales of the synthetic presets.
//!
//! The bookmaker scale is bisected against the target bookmaker accuracy,
//! then the player scale against the target KL advantage. Horse racing
//! accuracies are out of reach for flat-Dirichlet truth, so that preset
//! keeps a fixed bookmaker scale and only fits the player scale.
//!
//! `cargo run --release -p betport-core --example calibrate`

use betport_core::data::{generate_synthetic, Preset, SyntheticConfig};

const MATCHES: usize = 200_000;

fn summary(cfg: &SyntheticConfig) -> (f64, f64, f64) {
    let (_, s) = generate_synthetic(cfg).expect("valid config");
    (s.bookmaker_accuracy, s.player_accuracy, s.kl_advantage.unwrap_or(f64::NAN))
}

/// Bisects `f(x) = target` on `[lo, hi]` for a decreasing `f`.
fn bisect(mut lo: f64, mut hi: f64, target: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn main() {
    let targets = [
        (Preset::Horse, None, 0.0022),
        (Preset::Basketball, Some(0.70), -0.0146),
        (Preset::Football, Some(0.537), -0.013),
    ];
    for (preset, b_acc, kl) in targets {
        let base = preset.config(MATCHES, 12345);
        let book_noise = match b_acc {
            Some(acc) => bisect(0.0, 4.0, acc, |s| {
                summary(&SyntheticConfig { book_noise: s, ..base }).0
            }),
            None => base.book_noise,
        };
        let player_noise = bisect(0.0, 4.0, kl, |s| {
            summary(&SyntheticConfig { book_noise, player_noise: s, ..base }).2
        });
        let (b, m, a) = summary(&SyntheticConfig { book_noise, player_noise, ..base });
        println!(
            "{}: book_noise {book_noise:.4} player_noise {player_noise:.4} -> b-acc {b:.4} m-acc {m:.4} A_KL {a:.5}",
            preset.name()
        );
    }
}
