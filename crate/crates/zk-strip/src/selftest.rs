//! Invariant self-test suite behind the `check` CLI verb: quick seeded
//! sanity checks of the numerical core, one pass/fail line each.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Field, StripGrid};
use crate::propagator::{apply_propagator, build_symbol, phi1};
use crate::spectral::{dealias, derivative, forward_transform, inverse_transform};
use crate::weights::{eta, steklov_check, WeightSpec};
use num_complex::Complex64;
use std::f64::consts::PI;

pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, result: Result<String, String>) -> CheckResult {
    match result {
        Ok(detail) => CheckResult {
            name,
            passed: true,
            detail,
        },
        Err(detail) => CheckResult {
            name,
            passed: false,
            detail,
        },
    }
}

fn random_field(grid: StripGrid, rng: &mut ChaCha8Rng) -> Field {
    Field::from_fn(grid, |_, _| rng.gen_range(-1.0..1.0))
}

/// Run every self check with the given RNG seed.
pub fn run_all(seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = StripGrid::new(-8.0, 8.0, 32, PI, 7).unwrap();
    let mut results = Vec::new();

    results.push(check("transform round-trip", {
        let f = random_field(grid, &mut rng);
        let back = inverse_transform(&forward_transform(&f).unwrap()).unwrap();
        let defect = back.linf_distance(&f) / f.max_abs();
        if defect <= 1e-12 {
            Ok(format!("relative defect {defect:.2e}"))
        } else {
            Err(format!("relative defect {defect:.2e} > 1e-12"))
        }
    }));

    results.push(check("Parseval identity", {
        let f = random_field(grid, &mut rng);
        let s = forward_transform(&f).unwrap();
        let defect = (f.l2_norm_sq() - s.l2_norm_sq()).abs() / f.l2_norm_sq();
        if defect <= 1e-12 {
            Ok(format!("relative defect {defect:.2e}"))
        } else {
            Err(format!("relative defect {defect:.2e} > 1e-12"))
        }
    }));

    results.push(check("derivative composition", {
        let f = random_field(grid, &mut rng);
        let s = forward_transform(&f).unwrap();
        let twice = derivative(&derivative(&s, 0, 2).unwrap(), 0, 2).unwrap();
        let once = derivative(&s, 0, 4).unwrap();
        let mut defect = 0.0f64;
        let mut scale = 0.0f64;
        for (a, b) in twice.coeffs().iter().zip(once.coeffs().iter()) {
            defect = defect.max((a - b).norm());
            scale = scale.max(b.norm());
        }
        if defect <= 1e-10 * scale.max(1e-300) {
            Ok(format!("defect {defect:.2e}"))
        } else {
            Err(format!("defect {defect:.2e}"))
        }
    }));

    results.push(check("dealiasing is an orthogonal truncation", {
        let f = random_field(grid, &mut rng);
        let s = forward_transform(&f).unwrap();
        let d = dealias(&s);
        if d.l2_norm_sq() <= s.l2_norm_sq() * (1.0 + 1e-14) {
            Ok("energy non-increasing".into())
        } else {
            Err("energy increased under truncation".into())
        }
    }));

    results.push(check("Steklov bound and sharpness", {
        let l = grid.width_l();
        let bound = l * l / (PI * PI);
        let ny = grid.ny();
        let first: Vec<f64> = (1..=ny)
            .map(|j| (PI * j as f64 / (ny + 1) as f64).sin())
            .collect();
        let sharp = steklov_check(&first, l).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let profile: Vec<f64> = (0..ny).map(|_| rng.gen_range(-1.0..1.0)).collect();
            worst = worst.max(steklov_check(&profile, l).unwrap());
        }
        if (sharp - bound).abs() <= 1e-12 * bound && worst <= bound * (1.0 + 1e-12) {
            Ok(format!("sharp at l=1, sup over 1000 profiles {worst:.6}"))
        } else {
            Err(format!("sharp {sharp}, worst {worst}, bound {bound}"))
        }
    }));

    results.push(check("cutoff nonlinearity contract", {
        let mut ok = true;
        for &h in &[0.05, 0.1, 0.5] {
            for i in 0..=2000 {
                let u = -3.0 / h + (i as f64 / 2000.0) * 6.0 / h;
                let d = crate::evolution::g_h_prime(u, h);
                ok &= d.abs() <= 2.0 / h + 1e-12 && d.abs() <= 2.0 * u.abs() + 1e-12;
                if u.abs() <= 1.0 / h {
                    ok &= crate::evolution::g_h(u, h) == 0.5 * u * u;
                }
            }
        }
        if ok {
            Ok("quadratic below 1/h, derivative bounds hold".into())
        } else {
            Err("contract violated".into())
        }
    }));

    results.push(check("propagator semigroup + isometry", {
        let f = random_field(grid, &mut rng);
        let s = forward_transform(&f).unwrap();
        let sym = build_symbol(grid, 0.8, 0.02).unwrap();
        let ab = apply_propagator(&apply_propagator(&s, &sym, 0.2).unwrap(), &sym, 0.3).unwrap();
        let once = apply_propagator(&s, &sym, 0.5).unwrap();
        let mut defect = 0.0f64;
        for (a, b) in ab.coeffs().iter().zip(once.coeffs().iter()) {
            defect = defect.max((a - b).norm());
        }
        let disp = build_symbol(grid, 0.8, 0.0).unwrap();
        let norm0 = s.l2_norm_sq();
        let norm1 = apply_propagator(&s, &disp, 2.0).unwrap().l2_norm_sq();
        let iso = (norm0 - norm1).abs() / norm0;
        if defect <= 1e-13 * s.max_abs() && iso <= 1e-13 {
            Ok(format!("semigroup {defect:.2e}, isometry {iso:.2e}"))
        } else {
            Err(format!("semigroup {defect:.2e}, isometry {iso:.2e}"))
        }
    }));

    results.push(check("phi1 series consistency", {
        let mut worst = 0.0f64;
        for k in 0..24 {
            let z = Complex64::from_polar(0.049 + 0.002 * (k % 3) as f64, k as f64 * PI / 12.0);
            let series = phi1(z);
            let direct = (z.exp() - Complex64::new(1.0, 0.0)) / z;
            worst = worst.max((series - direct).norm());
        }
        if worst <= 1e-13 {
            Ok(format!("switch defect {worst:.2e}"))
        } else {
            Err(format!("switch defect {worst:.2e}"))
        }
    }));

    results.push(check("weight admissibility", {
        let kinds = [
            WeightSpec::rho_alpha(0.0).unwrap(),
            WeightSpec::rho_alpha(0.5).unwrap(),
            WeightSpec::kappa_alpha(0.0).unwrap(),
            WeightSpec::kappa_alpha(0.5).unwrap(),
            WeightSpec::exp_plus(0.5).unwrap(),
            WeightSpec::exp_pure(0.5).unwrap(),
            WeightSpec::kappa_zero_scaled(0.5).unwrap(),
        ];
        let mut details = Vec::new();
        let mut ok = true;
        for w in kinds {
            let c = w.admissibility_constant();
            ok &= c.is_finite();
            details.push(format!("{}: {c:.3}", w.label()));
        }
        if ok {
            Ok(details.join(", "))
        } else {
            Err("non-finite admissibility constant".into())
        }
    }));

    results.push(check("cut-off partition of unity", {
        let mut worst = 0.0f64;
        for i in 0..=1000 {
            let x = -0.5 + 2.0 * i as f64 / 1000.0;
            worst = worst.max((eta(x) + eta(1.0 - x) - 1.0).abs());
        }
        if worst <= 1e-13 {
            Ok(format!("defect {worst:.2e}"))
        } else {
            Err(format!("defect {worst:.2e}"))
        }
    }));

    results
}
