use bbi_core::learned::nn::FeedForward;
use bbi_core::learned::{InputScaling, Iqn};
use bbi_core::RngStream;

const H: f64 = 1e-6;
const TOL: f64 = 1e-4;

fn close(numeric: f64, analytic: f64) -> bool {
    (numeric - analytic).abs() <= TOL * analytic.abs().max(1.0)
}

fn random_input(rng: &mut RngStream, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(-2.0, 2.0)).collect()
}

#[test]
fn feedforward_gradients_match_central_differences() {
    let mut rng = RngStream::new(11);
    for case in 0..50 {
        let inputs = 1 + rng.below(5);
        let hidden = 2 + rng.below(12);
        let scale = rng.uniform(0.5, 3.0);
        let mut net = FeedForward::<f64>::new(inputs, hidden, InputScaling::identity(inputs), scale, &mut rng).unwrap();
        // Nonzero biases so that every parameter matters.
        for p in net.net_mut().params_mut() {
            *p += rng.uniform(-0.3, 0.3);
        }
        let x = random_input(&mut rng, inputs);
        let y = rng.uniform(-3.0, 3.0);
        let mut grad = vec![0.0; net.net().num_params()];
        net.loss_and_grad(&x, y, &mut grad);
        for i in 0..grad.len() {
            let orig = net.net().params()[i];
            net.net_mut().params_mut()[i] = orig + H;
            let up = net.loss(&x, y);
            net.net_mut().params_mut()[i] = orig - H;
            let down = net.loss(&x, y);
            net.net_mut().params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * H);
            assert!(close(fd, grad[i]), "case {case} param {i}: numeric {fd} analytic {}", grad[i]);
        }
    }
}

#[test]
fn iqn_gradients_match_central_differences() {
    let mut rng = RngStream::new(12);
    for case in 0..50 {
        let inputs = 1 + rng.below(5);
        let hidden = 2 + rng.below(12);
        let embedding = 1 + rng.below(8);
        let scale = rng.uniform(0.5, 3.0);
        let mut net = Iqn::<f64>::new(inputs, hidden, embedding, InputScaling::identity(inputs), scale, &mut rng).unwrap();
        for p in net.params_mut() {
            *p += rng.uniform(-0.3, 0.3);
        }
        let x = random_input(&mut rng, inputs);
        let y = rng.uniform(-3.0, 3.0);
        let tau = rng.uniform(0.02, 0.98);
        let mut grad = vec![0.0; net.num_params()];
        net.loss_and_grad(&x, y, tau, &mut grad);
        for i in 0..grad.len() {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + H;
            let up = net.loss(&x, y, tau);
            net.params_mut()[i] = orig - H;
            let down = net.loss(&x, y, tau);
            net.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * H);
            assert!(close(fd, grad[i]), "case {case} param {i}: numeric {fd} analytic {}", grad[i]);
        }
    }
}
