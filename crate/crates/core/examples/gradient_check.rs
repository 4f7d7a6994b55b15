//! Finite-difference checks of the hand-written backward passes on small
//! networks: both alignment losses through the fusion module, and the
//! action loss through the policy.

use lpaf::fusion::{alignment_loss, AlignKind, FusionModule};
use lpaf::nncore::{finite_diff_grad, max_relative_error, Tensor};
use lpaf::policy::{action_loss, PolicyParams};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIM: usize = 12;

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

fn main() -> lpaf::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for kind in [AlignKind::Mse, AlignKind::Cos] {
        let mut f = FusionModule::with_dims(DIM, 8, 1);
        // Perturb the zero-initialised output layer so every path carries gradient.
        let mut w = f.mlp().flatten();
        w.iter_mut().for_each(|v| *v += rng.gen_range(-0.1..0.1));
        let mut mlp = f.mlp().clone();
        mlp.set_flat(&w)?;
        f = FusionModule::from_mlp(mlp)?;

        let (za, zr) = (random(&mut rng, 4, DIM), random(&mut rng, 4, DIM));
        let out = alignment_loss(kind, &f, za.view(), zr.view())?;
        let theta = Tensor::vector(w)?;
        let numeric = finite_diff_grad(
            |t| {
                let mut m = f.mlp().clone();
                m.set_flat(t.data()).unwrap();
                let g = FusionModule::from_mlp(m).unwrap();
                alignment_loss(kind, &g, za.view(), zr.view()).unwrap().loss
            },
            &theta,
            1e-6,
        )?;
        let err = max_relative_error(&out.grads.flatten(), numeric.data());
        println!(
            "fusion / {:<3} params: max relative error {err:.2e}",
            kind.label()
        );
    }

    let p = PolicyParams::with_dims(DIM, 8, 2);
    let z = random(&mut rng, 5, DIM);
    let a = random(&mut rng, 5, 2);
    let tasks = [0, 1, 2, 0, 1];
    let out = action_loss(&p, z.view(), &tasks, a.view())?;
    let numeric = finite_diff_grad(
        |t| {
            let zz = Array2::from_shape_vec((5, DIM), t.data().to_vec()).unwrap();
            action_loss(&p, zz.view(), &tasks, a.view()).unwrap().loss
        },
        &Tensor::vector(z.iter().copied().collect())?,
        1e-6,
    )?;
    let analytic: Vec<f64> = out.grad_z.iter().copied().collect();
    println!(
        "policy / action latents: max relative error {:.2e}",
        max_relative_error(&analytic, numeric.data())
    );
    Ok(())
}
