//! Single-precision instantiation: the whole pipeline is generic over the
//! scalar type, and `f32` must track the `f64` reference on a shared driver
//! realization to within single-precision accumulation error.

use hurst_sense_core::{
    dyadic_sample, fbm_covariance, mean_and_se, sample_driver, solve_additive, DriverPath,
    FbmSynth, GridSpec, RoughLevel, SdeProblem,
};

#[test]
fn f32_synthesis_tracks_the_f64_reference() {
    let g64 = GridSpec::new(1.0f64, 8.0, 64, 32).unwrap();
    let g32 = GridSpec::new(1.0f32, 8.0, 64, 32).unwrap();
    let s64 = FbmSynth::new(0.7f64, &g64).unwrap();
    let s32 = FbmSynth::new(0.7f32, &g32).unwrap();
    assert!(
        (s64.c_h() - s32.c_h() as f64).abs() < 1e-6,
        "normalization constants disagree: {} vs {}",
        s64.c_h(),
        s32.c_h()
    );
    let cov64 = fbm_covariance(0.7f64, 0.25, 0.75);
    let cov32 = fbm_covariance(0.7f32, 0.25, 0.75) as f64;
    assert!((cov64 - cov32).abs() < 1e-6, "covariance {cov64} vs {cov32}");

    // One driver realization, cast down: the f32 path must follow f64.
    let d64 = sample_driver::<f64>(11, &g64);
    let d32 = DriverPath {
        seed: d64.seed,
        grid: g32,
        increments: d64.increments.iter().map(|&v| v as f32).collect(),
    };
    let b64 = s64.synthesize(&d64).unwrap();
    let b32 = s32.synthesize(&d32).unwrap();
    let scale = b64.path.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    for (a, b) in b64.path.iter().zip(&b32.path) {
        assert!(
            (a - *b as f64).abs() <= 1e-3 * scale,
            "path values diverge: {a} vs {b}"
        );
    }
    for (a, b) in b64.sensitivity.iter().zip(&b32.sensitivity) {
        assert!(
            (a - *b as f64).abs() <= 5e-3 * scale.max(a.abs()),
            "sensitivity values diverge: {a} vs {b}"
        );
    }

    // Downstream consumers accept the f32 bundle.
    let problem = SdeProblem::ou(1.0f32, 0.5);
    let sol = solve_additive(&problem, &b32).unwrap();
    let terminal = sol.terminal()[0];
    assert!(terminal.is_finite(), "f32 solve produced {terminal}");
    let ref64 = solve_additive(&SdeProblem::ou(1.0f64, 0.5), &b64).unwrap();
    assert!(
        (ref64.terminal()[0] - terminal as f64).abs() < 5e-3,
        "terminal states diverge: {} vs {terminal}",
        ref64.terminal()[0]
    );

    // Rough-level structure holds in single precision.
    let p = dyadic_sample(&g32, &b32.path, 4).unwrap();
    let rl = RoughLevel::new(&[p]).unwrap();
    let inc = rl.increment(0, 0, 16).unwrap();
    let diag = rl.area(0, 0, 0, 16).unwrap();
    assert!(
        (diag - 0.5 * inc * inc).abs() <= 1e-4,
        "diagonal identity off in f32: {diag} vs {}",
        0.5 * inc * inc
    );
    let chen = rl.area(0, 0, 0, 8).unwrap() + rl.area(0, 0, 8, 16).unwrap()
        + rl.increment(0, 0, 8).unwrap() * rl.increment(0, 8, 16).unwrap();
    assert!((diag - chen).abs() <= 1e-4, "chen identity off in f32");

    let (mean, se) = mean_and_se(&[1.0f32, 2.0, 3.0, 4.0]);
    assert!((mean - 2.5).abs() < 1e-6);
    assert!(se.is_some());
}
