use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;
use parisian_core::inversion::{invert_best_with_error, InversionConfig};
use parisian_core::psi::{psi, psi_quadrature};
use parisian_core::PsiEvalConfig;
use std::hint::black_box;

fn psi_regimes(c: &mut Criterion) {
    let cfg = PsiEvalConfig::default();
    let mut g = c.benchmark_group("psi");
    for (name, w) in [
        ("series", Complex64::new(1.0, 0.5)),
        ("erfcx", Complex64::new(-6.0, 3.0)),
        ("asymptotic", Complex64::new(-30.0, 4.0)),
    ] {
        g.bench_function(name, |b| b.iter(|| psi(black_box(w), &cfg).unwrap()));
    }
    g.sample_size(10);
    g.bench_function("quadrature_oracle", |b| b.iter(|| psi_quadrature(black_box(Complex64::new(1.0, 0.5)), 1e-12)));
    g.finish();
}

fn euler(c: &mut Criterion) {
    // e^{-α√(2z)} ↔ α e^{-α²/2t} / √(2π t³)
    let alpha = 0.7;
    let f = |z: Complex64| Ok(((-alpha * (2.0 * z).sqrt()).exp(), 0.0));
    let mut g = c.benchmark_group("euler_inversion");
    for terms in [25, 100] {
        let cfg = InversionConfig {
            terms_m: terms,
            burnin_terms: terms,
            ..InversionConfig::default()
        };
        g.bench_function(format!("gaussian_{terms}"), |b| {
            b.iter(|| invert_best_with_error(f, black_box(1.0), &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, psi_regimes, euler);
criterion_main!(benches);
