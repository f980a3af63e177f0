//! Compare backpropagated gradients with central finite differences.

use intent_ids::nn::{Activation, LossKind, Matrix, Network};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let net = Network::build(
        &[4, 5, 3, 1],
        &[Activation::Sigmoid, Activation::Linear, Activation::Sigmoid],
        9,
    )?;
    let x = Matrix::from_rows(&[[0.1, -0.4, 0.7, 0.2], [0.9, 0.3, -0.2, -0.6], [-0.5, 0.8, 0.4, 0.0]]);
    let t = Matrix::from_rows(&[[1.0], [0.0], [1.0]]);
    let h = 1e-6;

    for loss in [LossKind::Mse, LossKind::Bce] {
        let pass = net.forward(&x)?;
        let grads = net.backward(&pass, &t, loss)?;
        let mut worst: f64 = 0.0;
        for (l, layer) in net.layers.iter().enumerate() {
            for r in 0..layer.weights.rows() {
                for c in 0..layer.weights.cols() {
                    let (mut plus, mut minus) = (net.clone(), net.clone());
                    plus.layers[l].weights.row_mut(r)[c] += h;
                    minus.layers[l].weights.row_mut(r)[c] -= h;
                    let numeric = (plus.loss(&x, &t, loss)? - minus.loss(&x, &t, loss)?) / (2.0 * h);
                    let analytic = grads[l].weights[(r, c)];
                    let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
                    worst = worst.max(rel);
                }
            }
        }
        println!("{loss:?}: max relative weight-gradient error {worst:.2e}");
    }
    Ok(())
}
