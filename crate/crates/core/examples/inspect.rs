//! Print coupling/bias magnitude statistics for saved models.
use simach_core::model::Model;

fn main() {
    for path in std::env::args().skip(1) {
        let m = Model::load(&path).unwrap();
        let j = m.couplings();
        let h = m.biases();
        let mean = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64;
        let max = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        println!(
            "{path}: mean|J| {:.4}  max|J| {:.4}  mean|h| {:.4}  max|h| {:.4}",
            mean(j), max(j), mean(h), max(h)
        );
    }
}
