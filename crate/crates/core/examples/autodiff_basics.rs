//! Builds a tiny graph on the tape, runs the backward pass and compares one
//! gradient entry with a central difference.
//!
//! ```text
//! cargo run --example autodiff_basics
//! ```

use jokemeter::tensor::{Graph, NodeId, ParamId, ParamStore, Tape, Tensor};

fn loss(store: &ParamStore, x: ParamId, w: ParamId, b: ParamId) -> (Tape, NodeId, f64) {
    let mut g = Graph::new(store);
    let (xn, wn, bn) = (g.param(x), g.param(w), g.param(b));
    let conv = g.conv1d(xn, wn, bn, 1).unwrap();
    let act = g.leaky_relu(conv, 0.01);
    let pooled = g.max_pool_time(act).unwrap();
    let ce = g.cross_entropy(pooled, 1).unwrap();
    let value = g.value(ce).data()[0];
    (g.into_tape(), ce, value)
}

fn main() {
    let mut store = ParamStore::new();
    // Five time steps of 3-dimensional input, two filters of width 3.
    let x = store.add("x", Tensor::new(vec![5, 3], (0..15).map(|i| ((i * 7) % 11) as f64 / 5.0 - 1.0).collect()).unwrap());
    let w = store.add("w", Tensor::new(vec![2, 3, 3], (0..18).map(|i| ((i * 5) % 13) as f64 / 10.0 - 0.6).collect()).unwrap());
    let b = store.add("b", Tensor::vector(vec![0.1, -0.2]));

    let (tape, out, value) = loss(&store, x, w, b);
    tape.backward(out, &mut store).unwrap();
    println!("loss = {value:.6} ({} tape nodes)", tape.len());
    for id in [w, b] {
        let p = store.get(id);
        println!("d loss / d {} = {:?}", p.name, p.gradient.data().iter().map(|g| format!("{g:+.4}")).collect::<Vec<_>>());
    }

    let h = 1e-6;
    let analytic = store.get(w).gradient.data()[4];
    store.get_mut(w).tensor.data_mut()[4] += h;
    let up = loss(&store, x, w, b).2;
    store.get_mut(w).tensor.data_mut()[4] -= 2.0 * h;
    let down = loss(&store, x, w, b).2;
    println!("w[4]: analytic {analytic:+.8}, central difference {:+.8}", (up - down) / (2.0 * h));
}
