//! Adaptive Gauss-Kronrod quadrature for complex-valued integrands.
//!
//! A 7-point Gauss rule embedded in a 15-point Kronrod rule drives a
//! worst-panel-first bisection loop. The error estimate per panel is the
//! modulus of the Kronrod-Gauss difference.

use crate::C64;

/// Abscissae of the 15-point Kronrod rule on [-1, 1] (positive half).
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.000000000000000,
];

/// Weights of the 15-point Kronrod rule, matching `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];

/// Weights of the embedded 7-point Gauss rule (odd Kronrod abscissae).
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// Kronrod and Gauss estimates of the integral of `f` over [a, b].
fn gk15<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> (C64, C64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        kron += (f1 + f2) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
    }
    (kron * half, gauss * half)
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: C64,
    pub error_estimate: f64,
    pub panels: usize,
}

/// Worst-first adaptive integration of `f` over [0, 1]; at most 2^14 panels.
pub fn adaptive<F: Fn(f64) -> C64>(f: F, tol: f64) -> Result<QuadResult, QuadResult> {
    const MAX_PANELS: usize = 1 << 14;
    struct Panel {
        a: f64,
        b: f64,
        value: C64,
        err: f64,
    }
    let mk = |a: f64, b: f64| {
        let (k, g) = gk15(&f, a, b);
        Panel { a, b, value: k, err: (k - g).norm() }
    };
    let mut panels = vec![mk(0.0, 1.0)];
    loop {
        let total_err: f64 = panels.iter().map(|p| p.err).sum();
        if total_err <= tol {
            let value = panels.iter().map(|p| p.value).sum();
            return Ok(QuadResult { value, error_estimate: total_err, panels: panels.len() });
        }
        if panels.len() >= MAX_PANELS {
            let value = panels.iter().map(|p| p.value).sum();
            if std::env::var("LEGLAB_QUAD_DEBUG").as_deref() == Ok("2") {
                panic!("quad stall for backtrace");
            }
            if std::env::var("LEGLAB_QUAD_DEBUG").is_ok() {
                eprintln!(
                    "quad stall: err {:.3e} tol {:.3e} panels {} worst value {:?}",
                    total_err, tol, panels.len(), panels.iter().map(|p| p.value.norm()).fold(0.0, f64::max)
                );
            }
            return Err(QuadResult { value, error_estimate: total_err, panels: panels.len() });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.err.partial_cmp(&b.1.err).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let Panel { a, b, .. } = panels.swap_remove(worst);
        let mid = 0.5 * (a + b);
        panels.push(mk(a, mid));
        panels.push(mk(mid, b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial_exactly() {
        // t^3 over [0,1] = 1/4
        let r = adaptive(|t| C64::new(t * t * t, 0.0), 1e-12).unwrap();
        assert!((r.value.re - 0.25).abs() < 1e-13);
        assert!(r.value.im.abs() < 1e-14);
    }

    #[test]
    fn integrates_oscillatory_complex() {
        // e^{2 pi i t} over [0,1] = 0
        let r = adaptive(|t| C64::new(0.0, 2.0 * std::f64::consts::PI * t).exp(), 1e-12).unwrap();
        assert!(r.value.norm() < 1e-12);
    }

    #[test]
    fn reports_nonconvergence() {
        // 1/sqrt(|t - pi/8|) has an interior singularity the panel cap cannot resolve to 1e-15
        let r = adaptive(
            |t| C64::new(1.0 / (t - std::f64::consts::FRAC_PI_8).abs().sqrt().max(1e-300), 0.0),
            1e-15,
        );
        assert!(r.is_err());
    }
}
