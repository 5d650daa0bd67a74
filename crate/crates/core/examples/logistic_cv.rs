//! L2 logistic regression with cross-validated regularisation on a toy problem.
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use commsuccess::model::{auc, cv_grid_search, default_lambdas, train_logistic, Matrix, Standardizer, TrainOptions};

fn main() -> commsuccess::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (n, d) = (300, 5);
    let truth = [2.0, -1.0, 0.5, 0.0, 0.0];
    let mut x = Matrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let mut z = 0.0;
        for (j, w) in truth.iter().enumerate() {
            let v: f64 = rng.gen_range(-1.0..1.0) * (j + 1) as f64;
            x.set(i, j, v);
            z += w * v / (j + 1) as f64;
        }
        labels.push(rng.gen_bool(1.0 / (1.0 + (-3.0 * z).exp())));
    }
    let x = Standardizer::fit(&x).transform(&x);

    let options = TrainOptions::default();
    let search = cv_grid_search(&x, &labels, &default_lambdas(), 10, 1, &options)?;
    for (lambda, score) in &search.scores {
        println!("lambda {lambda:>8.0e}: cv auc {score:.4}");
    }
    println!("best lambda {:.0e} over {} folds", search.best_lambda, search.folds_used);

    let signs: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let model = train_logistic(&x, &signs, search.best_lambda, &options)?;
    println!(
        "weights {:?}\nbias {:.3}, {} iterations ({:?}), training auc {:.4}",
        model.weights.iter().map(|w| (w * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
        model.bias,
        model.report.iterations,
        model.report.reason,
        auc(&model.decision_function(&x), &labels)?
    );
    Ok(())
}
