use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use y00lab::infotheory::{check_eq10, JointDist};

use crate::Verdict;

const TABLES: usize = 1000;
const W: usize = 4;
const NAMES: [&str; 4] = ["S", "CE", "X", "E"];

/// Random law on (S, X, E) with about a third of the cells zeroed; C_E
/// follows from the cipher relation.
fn generic(rng: &mut ChaCha8Rng) -> Vec<(usize, usize, usize, usize, f64)> {
    let mut cells = Vec::new();
    for s in 0..W {
        for x in 0..W {
            for e in 0..W {
                if rng.random::<f64>() < 0.35 {
                    continue;
                }
                cells.push((s, x ^ s ^ e, x, e, rng.random::<f64>()));
            }
        }
    }
    cells
}

/// Random law on (C_E, X) with E = f(C_E, X) for a random f.
fn deterministic(rng: &mut ChaCha8Rng) -> Vec<(usize, usize, usize, usize, f64)> {
    let mut cells = Vec::new();
    for ce in 0..W {
        for x in 0..W {
            if rng.random::<f64>() < 0.35 {
                continue;
            }
            let e = rng.random_range(0..W);
            cells.push((ce ^ x ^ e, ce, x, e, rng.random::<f64>()));
        }
    }
    cells
}

fn table(cells: &[(usize, usize, usize, usize, f64)]) -> Option<JointDist> {
    let total: f64 = cells.iter().map(|c| c.4).sum();
    if total == 0.0 {
        return None;
    }
    let mut probs = vec![0.0; W * W * W * W];
    for &(s, ce, x, e, p) in cells {
        probs[((s * W + ce) * W + x) * W + e] += p / total;
    }
    JointDist::new(&NAMES, &[W; 4], probs).ok()
}

/// Support test: one E value per observed (C_E, X).
fn e_is_function(cells: &[(usize, usize, usize, usize, f64)]) -> bool {
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    cells.iter().filter(|c| c.4 > 0.0).all(|&(_, ce, x, e, _)| *seen.entry((ce, x)).or_insert(e) == e)
}

/// H(E | C_E, X) by direct summation.
fn noise_given_view(cells: &[(usize, usize, usize, usize, f64)]) -> f64 {
    let total: f64 = cells.iter().map(|c| c.4).sum();
    let mut joint: HashMap<(usize, usize, usize), f64> = HashMap::new();
    let mut view: HashMap<(usize, usize), f64> = HashMap::new();
    for &(_, ce, x, e, p) in cells {
        *joint.entry((ce, x, e)).or_default() += p / total;
        *view.entry((ce, x)).or_default() += p / total;
    }
    joint.iter().filter(|(_, &p)| p > 0.0).map(|(&(ce, x, _), &p)| -p * (p / view[&(ce, x)]).log2()).sum()
}

pub fn run() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut violations = 0;
    let mut wrong_equality = 0;
    let mut gap_err: f64 = 0.0;
    let mut residual: f64 = 0.0;
    let mut deterministic_tables = 0;
    let mut done = 0;
    while done < TABLES {
        let cells = if done % 2 == 0 { generic(&mut rng) } else { deterministic(&mut rng) };
        let Some(dist) = table(&cells) else { continue };
        let rep = check_eq10(&dist, "S", "CE", "X", "E").unwrap();
        let det = e_is_function(&cells);
        deterministic_tables += det as usize;
        violations += (rep.gap < -1e-12) as usize;
        wrong_equality += (rep.equality != det) as usize;
        gap_err = gap_err.max((rep.gap - noise_given_view(&cells)).abs());
        let direct = dist.entropy(&["S", "CE", "X", "E"], &[]).unwrap() - dist.entropy(&["CE", "X", "E"], &[]).unwrap();
        residual = residual.max(rep.residual_given_noise.abs()).max(direct.abs());
        done += 1;
    }
    Verdict::new(
        violations == 0 && wrong_equality == 0 && residual <= 1e-12 && gap_err <= 1e-10,
        format!(
            "{TABLES} tables ({deterministic_tables} with E a function of (C_E, X)): {violations} violations, \
             {wrong_equality} equality mismatches, gap vs direct H(E|C_E,X) {gap_err:.1e}, \
             H(S|C_E,X,E) residual {residual:.1e}"
        ),
    )
}
