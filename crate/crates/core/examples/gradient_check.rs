//! Compare the analytic loss gradient and encoder backward pass against
//! central finite differences.
//!
//! ```bash
//! cargo run -p suvr --example gradient_check
//! ```

use suvr::numeric::{random_unit_rows, SeededRng};
use suvr::objective::{loss_gradient, suvr_loss, Temperature};
use suvr::{MemoryBank, MlpEncoder};

const H: f64 = 1e-5;

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let n = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    n(&diff) / n(a).max(n(b))
}

fn main() -> suvr::Result<()> {
    let mut rng = SeededRng::new(11);
    let bank = MemoryBank::from_embeddings(random_unit_rows(12, 6, &mut rng)?, 0.5)?;
    let (i, pos, neg) = (0, [3, 5, 8], [1, 9]);
    for tau in [0.07, 0.5, 1.0] {
        let tau = Temperature::new(tau)?;
        let v: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
        let analytic = loss_gradient(&bank, &v, i, &pos, &neg, tau)?;
        let mut numeric = Vec::new();
        for c in 0..v.len() {
            let (mut up, mut down) = (v.clone(), v.clone());
            up[c] += H;
            down[c] -= H;
            let f = |x: &[f64]| suvr_loss(&bank, x, i, &pos, &neg, tau).map(|l| l.total);
            numeric.push((f(&up)? - f(&down)?) / (2.0 * H));
        }
        println!("loss     tau={:<4} relative error {:.2e}", tau.get(), rel_err(&analytic, &numeric));
    }

    // The encoder is checked through the probe u . forward(theta, x).
    let enc = MlpEncoder::new(5, &[7], 4, &mut rng)?;
    let x: Vec<f64> = (0..5).map(|_| rng.normal()).collect();
    let u: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
    let analytic = enc.backward(&enc.forward(&x)?, &u)?.slices().concat();
    let probe = |e: &MlpEncoder| -> suvr::Result<f64> { Ok(e.embed(&x)?.iter().zip(&u).map(|(a, b)| a * b).sum()) };
    let mut numeric = Vec::new();
    for (t, len) in enc.parameter_lengths().into_iter().enumerate() {
        for c in 0..len {
            let (mut up, mut down) = (enc.clone(), enc.clone());
            up.parameters_mut()[t][c] += H;
            down.parameters_mut()[t][c] -= H;
            numeric.push((probe(&up)? - probe(&down)?) / (2.0 * H));
        }
    }
    println!("encoder  {} parameters, relative error {:.2e}", numeric.len(), rel_err(&analytic, &numeric));
    Ok(())
}
