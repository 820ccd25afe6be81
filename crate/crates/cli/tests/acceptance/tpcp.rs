use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use y00lab::qdetect::{best_success, dpi_check, fock_binary_ensemble, random_channel, MixedStateEnsemble, PureStateEnsemble};

use crate::Verdict;

const CHANNELS: usize = 100;
const PAIRS: usize = 30;
const FOCK_CUTOFF: usize = 12;

fn channels(rng: &mut ChaCha8Rng) -> Result<(f64, usize), String> {
    let mut worst = f64::NEG_INFINITY;
    let mut exceed = 0;
    for _ in 0..CHANNELS {
        let a = Complex64::from_polar(rng.random_range(0.1..0.6), rng.random_range(0.0..2.0 * PI));
        let b = Complex64::from_polar(rng.random_range(0.1..0.6), rng.random_range(0.0..2.0 * PI));
        let (ens, _) = fock_binary_ensemble(a, b, rng.random_range(0.2..0.8), FOCK_CUTOFF).map_err(|e| e.to_string())?;
        let ancilla = rng.random_range(1..=3);
        let k = random_channel(FOCK_CUTOFF + 1, ancilla, rng);
        let gain = dpi_check(&ens, &k).map_err(|e| e.to_string())?.gain();
        worst = worst.max(gain);
        exceed += (gain > 1e-9) as usize;
    }
    Ok((worst, exceed))
}

/// One slot group: `slots` slots of `m`-ary basis words, hypotheses are the
/// word tuples. Each slot sends `Map[s ⊕ d] + M·parity` with the plaintext
/// and polarity fixed; `d` is the randomization word, zero in the pure arm.
struct Instance {
    m: usize,
    slots: usize,
    map: Vec<usize>,
    xdx: Vec<usize>,
    amp: f64,
}

impl Instance {
    fn amplitude(&self, t: usize, word: usize) -> Complex64 {
        let base = self.map[word];
        let sym = base + self.m * ((base + self.xdx[t]) % 2);
        Complex64::from_polar(self.amp, PI * sym as f64 / self.m as f64)
    }

    fn words(&self, h: usize) -> Vec<usize> {
        (0..self.slots).map(|t| (h / self.m.pow(t as u32)) % self.m).collect()
    }

    fn state(&self, h: usize, d: usize) -> Vec<Complex64> {
        let (s, d) = (self.words(h), self.words(d));
        (0..self.slots).map(|t| self.amplitude(t, s[t] ^ d[t])).collect()
    }
}

fn dsr_pairs(rng: &mut ChaCha8Rng) -> Result<(usize, f64, f64), String> {
    let shapes = [(2, 1), (2, 2), (4, 1), (8, 1)];
    let mut increases = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut mean_drop = 0.0;
    for i in 0..PAIRS {
        let (m, slots) = shapes[i % shapes.len()];
        let mut map: Vec<usize> = (0..m).collect();
        map.shuffle(rng);
        let inst = Instance {
            m,
            slots,
            map,
            xdx: (0..slots).map(|_| rng.random_range(0..2)).collect(),
            amp: rng.random_range(0.3..2.0),
        };
        let k = m.pow(slots as u32);
        let dsupport = k.min(64 / k);
        let mut dw: Vec<f64> = (0..dsupport).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = dw.iter().sum();
        dw.iter_mut().for_each(|w| *w /= total);
        let mut dvals: Vec<usize> = (0..k).collect();
        dvals.shuffle(rng);
        let pure = PureStateEnsemble::uniform((0..k).map(|h| inst.state(h, 0)).collect()).map_err(|e| e.to_string())?;
        let mixed = MixedStateEnsemble::new(
            vec![1.0 / k as f64; k],
            (0..k).map(|h| dvals[..dsupport].iter().zip(&dw).map(|(&d, &w)| (w, inst.state(h, d))).collect()).collect(),
        )
        .map_err(|e| e.to_string())?;
        let p = best_success(&pure.to_density());
        let q = best_success(&mixed.to_density());
        worst = worst.max(q - p);
        mean_drop += (p - q) / PAIRS as f64;
        increases += (q > p + 1e-8) as usize;
    }
    Ok((increases, worst, mean_drop))
}

pub fn run() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    let (gain, exceed) = match channels(&mut rng) {
        Ok(v) => v,
        Err(e) => return Verdict::new(false, e),
    };
    let (increases, worst, drop) = match dsr_pairs(&mut rng) {
        Ok(v) => v,
        Err(e) => return Verdict::new(false, e),
    };
    Verdict::new(
        exceed == 0 && increases == 0,
        format!(
            "{CHANNELS} channels: {exceed} gains > 1e-9 (max gain {gain:.1e}); {PAIRS} DSR pairs: {increases} increases \
             (max mixed − pure {worst:.1e}, mean drop {drop:.4})"
        ),
    )
}
