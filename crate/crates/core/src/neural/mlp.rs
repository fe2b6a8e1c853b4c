use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

/// Fully connected network with ReLU hidden layers and a linear output.
///
/// Parameters live in one flat vector; layer `l` stores its weight matrix
/// (`out × in`, row-major) followed by its bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    params: Vec<f64>,
}

/// Intermediate values of a batched forward pass, kept for backprop.
#[derive(Clone, Debug)]
pub struct Tape {
    /// Input to each layer (post-activation of the previous one).
    inputs: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Stacks per-row feature vectors into a matrix.
pub fn features_matrix(rows: &[Vec<f64>]) -> Array2<f64> {
    let cols = rows.first().map_or(0, Vec::len);
    let mut m = Array2::zeros((rows.len(), cols));
    for (mut r, v) in m.rows_mut().into_iter().zip(rows) {
        r.assign(&ArrayView1::from(v.as_slice()));
    }
    m
}

impl Mlp {
    /// Fan-in scaled uniform initialization, `U(−1/√in, 1/√in)`.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Self {
        assert!(widths.len() >= 2, "an MLP needs at least input and output widths");
        let mut params = Vec::with_capacity(param_count(widths));
        for w in widths.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..(w[0] * w[1] + w[1]) {
                params.push(rng.random_range(-bound..bound));
            }
        }
        Self { widths: widths.to_vec(), params }
    }

    pub fn zeros(widths: &[usize]) -> Self {
        assert!(widths.len() >= 2);
        Self { widths: widths.to_vec(), params: vec![0.0; param_count(widths)] }
    }

    pub fn from_params(widths: &[usize], params: Vec<f64>) -> Result<Self> {
        if widths.len() < 2 || params.len() != param_count(widths) {
            return Err(Error::InvalidArgument(format!(
                "widths {widths:?} need {} parameters, got {}",
                param_count(widths),
                params.len()
            )));
        }
        Ok(Self { widths: widths.to_vec(), params })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    fn offset(&self, layer: usize) -> usize {
        param_count(&self.widths[..=layer])
    }

    fn weight(&self, layer: usize) -> ArrayView2<'_, f64> {
        let (i, o) = (self.widths[layer], self.widths[layer + 1]);
        let off = self.offset(layer);
        ArrayView2::from_shape((o, i), &self.params[off..off + o * i]).unwrap()
    }

    fn bias(&self, layer: usize) -> ArrayView1<'_, f64> {
        let (i, o) = (self.widths[layer], self.widths[layer + 1]);
        let off = self.offset(layer) + o * i;
        ArrayView1::from(&self.params[off..off + o])
    }

    /// Bias vector of the output layer.
    pub fn output_bias_mut(&mut self) -> &mut [f64] {
        let l = self.n_layers() - 1;
        let (i, o) = (self.widths[l], self.widths[l + 1]);
        let off = self.offset(l) + o * i;
        &mut self.params[off..off + o]
    }

    /// Weight matrix of the output layer, row-major `out × in`.
    pub fn output_weight_mut(&mut self) -> &mut [f64] {
        let l = self.n_layers() - 1;
        let (i, o) = (self.widths[l], self.widths[l + 1]);
        let off = self.offset(l);
        &mut self.params[off..off + o * i]
    }

    /// Single-input forward pass.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_dim(), "input dimension mismatch");
        let mut cur = x.to_vec();
        let last = self.n_layers() - 1;
        for l in 0..=last {
            let (i, o) = (self.widths[l], self.widths[l + 1]);
            let off = self.offset(l);
            let w = &self.params[off..off + o * i];
            let b = &self.params[off + o * i..off + o * i + o];
            let mut next = Vec::with_capacity(o);
            for r in 0..o {
                let row = &w[r * i..(r + 1) * i];
                let mut z = b[r];
                for (wv, xv) in row.iter().zip(&cur) {
                    z += wv * xv;
                }
                next.push(if l < last { z.max(0.0) } else { z });
            }
            cur = next;
        }
        cur
    }

    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.forward_tape(x).output
    }

    pub fn forward_tape(&self, x: ArrayView2<'_, f64>) -> Tape {
        assert_eq!(x.ncols(), self.input_dim(), "input dimension mismatch");
        let last = self.n_layers() - 1;
        let mut inputs = Vec::with_capacity(self.n_layers());
        let mut cur = x.to_owned();
        for l in 0..=last {
            let mut z = cur.dot(&self.weight(l).t());
            z += &self.bias(l);
            inputs.push(cur);
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            cur = z;
        }
        Tape { inputs, output: cur }
    }

    /// Reverse-mode gradient of a scalar loss whose derivative with respect
    /// to the batch output is `d_out`.
    pub fn backward(&self, tape: &Tape, d_out: ArrayView2<'_, f64>) -> Vec<f64> {
        assert_eq!(d_out.dim(), tape.output.dim(), "output gradient shape mismatch");
        let mut grad = vec![0.0; self.params.len()];
        let mut dz = d_out.to_owned();
        for l in (0..self.n_layers()).rev() {
            let input = &tape.inputs[l];
            let (i, o) = (self.widths[l], self.widths[l + 1]);
            let off = self.offset(l);
            let dw = dz.t().dot(input);
            grad[off..off + o * i].copy_from_slice(dw.as_slice().expect("standard layout"));
            let db = dz.sum_axis(Axis(0));
            grad[off + o * i..off + o * i + o].copy_from_slice(db.as_slice().unwrap());
            if l > 0 {
                let mut dx = dz.dot(&self.weight(l));
                // ReLU: the stored input is the activation, positive iff the pre-activation was.
                ndarray::Zip::from(&mut dx).and(input).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                dz = dx;
            }
        }
        grad
    }

    /// Text snapshot: a `widths` header line followed by one parameter per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::from("widths");
        for x in &self.widths {
            write!(header, " {x}").unwrap();
        }
        writeln!(w, "{header}")?;
        for p in &self.params {
            // `{:?}` prints the shortest representation that round-trips.
            writeln!(w, "{p:?}")?;
        }
        Ok(())
    }

    pub fn read_text<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let header = lines.next().ok_or_else(|| Error::InvalidArgument("empty snapshot".into()))??;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("widths") {
            return Err(Error::InvalidArgument(format!("bad snapshot header {header:?}")));
        }
        let widths = parts
            .map(|p| p.parse::<usize>().map_err(|e| Error::InvalidArgument(format!("bad width {p:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let mut params = Vec::new();
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            params.push(t.parse::<f64>().map_err(|e| Error::InvalidArgument(format!("bad parameter {t:?}: {e}")))?);
        }
        Self::from_params(&widths, params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::stream_rng;
    use ndarray::array;

    fn fd_grad(net: &Mlp, loss: &dyn Fn(&Mlp) -> f64) -> Vec<f64> {
        let h = 1e-6;
        (0..net.n_params())
            .map(|k| {
                let mut p = net.clone();
                p.params_mut()[k] += h;
                let up = loss(&p);
                p.params_mut()[k] -= 2.0 * h;
                let dn = loss(&p);
                (up - dn) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[3, 32, 32, 2]);
        assert_eq!(net.forward(&[1.0, -2.0, 0.5]), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer() {
        let net = Mlp::from_params(&[2, 2], vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(net.forward(&[0.3, -0.7]), vec![0.3, -0.7]);
    }

    #[test]
    fn seeded_output_regression() {
        let net = Mlp::new(&[3, 32, 32, 2], &mut stream_rng(42, 0));
        let out = net.forward(&[0.5, -0.1, 0.2]);
        let again = Mlp::new(&[3, 32, 32, 2], &mut stream_rng(42, 0)).forward(&[0.5, -0.1, 0.2]);
        assert_eq!(out, again);
        let batch = net.forward_batch(array![[0.5, -0.1, 0.2]].view());
        for (a, b) in out.iter().zip(batch.row(0)) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn single_linear_unit_gradient() {
        // loss = (wx + b − y)², dloss = 2(wx+b−y)·(x, 1)
        let (w, b, x, y) = (0.7, -0.2, 1.5, 0.4);
        let net = Mlp::from_params(&[1, 1], vec![w, b]).unwrap();
        let tape = net.forward_tape(array![[x]].view());
        let r = tape.output[[0, 0]] - y;
        let g = net.backward(&tape, array![[2.0 * r]].view());
        let expect = 2.0 * (w * x + b - y);
        assert!((g[0] - expect * x).abs() < 1e-14);
        assert!((g[1] - expect).abs() < 1e-14);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let net = Mlp::new(&[3, 8, 2], &mut stream_rng(1, 0));
        let tape = net.forward_tape(array![[0.1, 0.2, 0.3]].view());
        let g = net.backward(&tape, Array2::zeros((1, 2)).view());
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let net = Mlp::new(&[3, 32, 32, 2], &mut stream_rng(9, 0));
        let mut rng = stream_rng(9, 1);
        let x = Array2::from_shape_fn((16, 3), |_| rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_fn((16, 2), |_| rng.random_range(-1.0..1.0));
        let loss = |n: &Mlp| {
            let o = n.forward_batch(x.view());
            (&o - &y).mapv(|v| v * v).sum() + o.column(0).mapv(|v| v.sin()).sum()
        };
        let tape = net.forward_tape(x.view());
        let d = {
            let mut d = (&tape.output - &y) * 2.0;
            for (mut r, o) in d.rows_mut().into_iter().zip(tape.output.rows()) {
                r[0] += o[0].cos();
            }
            d
        };
        let g = net.backward(&tape, d.view());
        let f = fd_grad(&net, &loss);
        for (a, b) in g.iter().zip(&f) {
            let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
            assert!(rel < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn text_snapshot_round_trip() {
        let net = Mlp::new(&[3, 4, 2], &mut stream_rng(3, 3));
        let mut buf = Vec::new();
        net.write_text(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("widths 3 4 2\n"));
        assert_eq!(Mlp::read_text(buf.as_slice()).unwrap(), net);
        assert!(Mlp::read_text("widths 3 4 2\n1.0\n".as_bytes()).is_err());
    }
}
