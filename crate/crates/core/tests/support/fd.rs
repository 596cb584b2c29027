//! Central finite differences and the micro instances used for gradient
//! checks.

use hfedf_core::math::{dot, Matrix, RngStream};
use hfedf_core::models::{ClientModel, HyperConfig, Hypernetwork, ParamVector};

pub const H: f64 = 1e-6;

/// Norm-wise relative error `|a - b| / max(|a|, |b|)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-300)
}

pub fn central_diff(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + H;
            let up = f(&probe);
            probe[i] = orig - H;
            let dn = f(&probe);
            probe[i] = orig;
            (up - dn) / (2.0 * H)
        })
        .collect()
}

/// Client MLP 4 -> 8 -> 3 and a width-5 hypernetwork for three clients.
pub fn micro_hypernet(seed: u64) -> (ClientModel, Hypernetwork) {
    let client = ClientModel::new(4, vec![8], 3);
    let cfg = HyperConfig {
        embed_dim: 2,
        trunk_width: 5,
        trunk_depth: 4,
        leaky_slope: 0.01,
    };
    let hn = Hypernetwork::new(cfg, client.layout(), 3, &mut RngStream::new(seed, "hn"));
    (client, hn)
}

/// Relative error of the client backward pass against differences of the
/// mean loss, for one random draw.
pub fn client_backward_error(draw: u64) -> f64 {
    let model = ClientModel::new(4, vec![8], 3);
    let mut rng = RngStream::new(draw, "client-fd");
    let params = model.init(&mut rng);
    let x = Matrix::from_vec(8, 4, (0..32).map(|_| rng.normal(0.0, 1.0)).collect()).unwrap();
    let y: Vec<usize> = (0..8).map(|_| rng.below(3)).collect();
    let (_, grad) = model.backward(&params, &x, &y).unwrap();
    let layout = model.layout();
    let fd = central_diff(params.values(), |v| {
        let p = ParamVector::from_values(layout.clone(), v.to_vec()).unwrap();
        model.backward(&p, &x, &y).unwrap().0
    });
    rel_err(grad.values(), &fd)
}

/// Relative errors `(θ, ν)` of the hypernetwork VJP against differences
/// of `<h(θ, ν), Δ>` for a random Δ.
pub fn hypernet_vjp_error(draw: u64) -> (f64, f64) {
    let (_, hn) = micro_hypernet(draw);
    let mut rng = RngStream::new(draw, "delta");
    let client = (draw % 3) as usize;
    let layout = hn.client_layout().clone();
    let delta = ParamVector::from_values(
        layout.clone(),
        (0..layout.size()).map(|_| rng.normal(0.0, 1.0)).collect(),
    )
    .unwrap();
    let g = hn.vjp(client, &delta).unwrap();

    let theta_layout = hn.theta.layout().clone();
    let fd_theta = central_diff(hn.theta.values(), |t| {
        let mut probe = hn.clone();
        probe.theta = ParamVector::from_values(theta_layout.clone(), t.to_vec()).unwrap();
        dot(probe.forward(client).unwrap().values(), delta.values())
    });
    let fd_nu = central_diff(hn.embeddings.row(client), |e| {
        dot(hn.forward_embedding(e).unwrap().values(), delta.values())
    });
    (rel_err(&g.g_theta, &fd_theta), rel_err(&g.g_nu, &fd_nu))
}
