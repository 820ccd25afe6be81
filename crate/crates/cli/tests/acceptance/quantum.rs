use num_complex::Complex64;

use y00lab::qdetect::{
    antipodal_overlap_sqr, cs_bound, helstrom_binary, helstrom_pure, optimality_residuals, srm, PureStateEnsemble,
};

use crate::Verdict;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn psk(k: usize, alpha: f64) -> Vec<Vec<Complex64>> {
    (0..k).map(|j| vec![Complex64::from_polar(alpha, 2.0 * std::f64::consts::PI * j as f64 / k as f64)]).collect()
}

pub fn run() -> Verdict {
    let mut notes = Vec::new();

    let mut overlap_err: f64 = 0.0;
    for a in [0.5, 1.0, 2.0] {
        let got = antipodal_overlap_sqr(c(a, 0.0)).unwrap();
        overlap_err = overlap_err.max((got - (-4.0 * a * a).exp()).abs());
    }
    let overlap_ok = overlap_err <= 1e-10;
    notes.push(format!("overlap err {overlap_err:.1e}"));

    let closed = (1.0 + (1.0 - (-4f64).exp()).sqrt()) / 2.0;
    let from_overlap = helstrom_pure(antipodal_overlap_sqr(c(1.0, 0.0)).unwrap(), 0.5);
    let pm = PureStateEnsemble::uniform(vec![vec![c(1.0, 0.0)], vec![c(-1.0, 0.0)]]).unwrap().to_density();
    let from_trace_norm = helstrom_binary(&pm.rhos[0], &pm.rhos[1], 0.5);
    let helstrom_err = (from_overlap - closed).abs().max((from_trace_norm - closed).abs());
    let helstrom_ok = helstrom_err <= 1e-9;
    notes.push(format!("helstrom {from_trace_norm:.9} err {helstrom_err:.1e}"));

    let mut srm_worst: f64 = 0.0;
    for a in [0.3, 0.5, 0.8, 1.0, 1.5] {
        let d = PureStateEnsemble::uniform(psk(4, a)).unwrap().to_density();
        let rep = optimality_residuals(&d, &srm(&d).measurement);
        srm_worst = srm_worst.max(rep.max_residual()).max(-rep.min_eig_w_minus_gamma);
    }
    let srm_ok = srm_worst <= 1e-8;
    notes.push(format!("4-PSK SRM residual {srm_worst:.1e}"));

    let ensembles: Vec<PureStateEnsemble> = vec![
        PureStateEnsemble::uniform(psk(2, 0.7)).unwrap(),
        PureStateEnsemble::uniform(psk(4, 0.5)).unwrap(),
        PureStateEnsemble::uniform(psk(4, 2.0)).unwrap(),
        PureStateEnsemble::uniform(psk(8, 1.2)).unwrap(),
        PureStateEnsemble::new(
            vec![0.5, 0.3, 0.2],
            vec![vec![c(1.0, 0.0)], vec![c(0.0, 0.7)], vec![c(-0.4, -0.4)]],
        )
        .unwrap(),
        PureStateEnsemble::uniform(vec![
            vec![c(0.6, 0.0), c(0.6, 0.0)],
            vec![c(0.6, 0.0), c(-0.6, 0.0)],
            vec![c(-0.6, 0.0), c(0.6, 0.0)],
            vec![c(-0.6, 0.0), c(-0.6, 0.0)],
        ])
        .unwrap(),
    ];
    let mut cs_max: f64 = 0.0;
    let mut cs_ok = true;
    for e in &ensembles {
        let b = cs_bound(e, &srm(&e.to_density()).measurement).unwrap();
        cs_max = cs_max.max(b.ratio_bound);
        cs_ok &= b.ratio_bound < 1.0 && b.achieved <= b.cauchy_schwarz + 1e-12;
    }
    notes.push(format!("max ratio bound {cs_max:.6} over {} ensembles", ensembles.len()));

    Verdict::new(overlap_ok && helstrom_ok && srm_ok && cs_ok, notes.join("; "))
}
