//! 3×3 same-padding convolutions with exact backward passes.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::Tensor3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    /// Linear output; used by tests and ablations.
    Identity,
}

impl Activation {
    fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-a).exp()),
            Activation::Identity => a,
        }
    }

    /// Derivative expressed through the activation output.
    fn slope_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::Sigmoid => 0,
            Activation::Identity => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Sigmoid),
            1 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// One convolution: weights `out × in × k × k`, one bias per output channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub out_ch: usize,
    pub in_ch: usize,
    pub kernel: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl ConvLayer {
    pub fn new(
        out_ch: usize,
        in_ch: usize,
        kernel: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if kernel.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "kernel size {kernel} must be odd"
            )));
        }
        if weights.len() != out_ch * in_ch * kernel * kernel || bias.len() != out_ch {
            return Err(Error::Dimension(format!(
                "conv {out_ch}x{in_ch}x{kernel}x{kernel}: got {} weights, {} biases",
                weights.len(),
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite conv parameter".into()));
        }
        Ok(Self {
            out_ch,
            in_ch,
            kernel,
            weights,
            bias,
            activation,
        })
    }

    pub fn zeros(out_ch: usize, in_ch: usize, kernel: usize, activation: Activation) -> Self {
        Self::new(
            out_ch,
            in_ch,
            kernel,
            vec![0.0; out_ch * in_ch * kernel * kernel],
            vec![0.0; out_ch],
            activation,
        )
        .expect("valid shape")
    }

    /// Uniform `±1/sqrt(fan_in)` weights, zero biases.
    pub fn random(
        out_ch: usize,
        in_ch: usize,
        kernel: usize,
        activation: Activation,
        rng: &mut RngStream,
    ) -> Self {
        let bound = 1.0 / ((in_ch * kernel * kernel) as f64).sqrt();
        let mut layer = Self::zeros(out_ch, in_ch, kernel, activation);
        for w in &mut layer.weights {
            *w = bound * (2.0 * rng.uniform() - 1.0);
        }
        layer
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn w(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.weights[((o * self.in_ch + i) * self.kernel + ky) * self.kernel + kx]
    }

    pub fn forward(&self, x: &Tensor3) -> Result<Tensor3> {
        let (c, h, w) = x.shape();
        if c != self.in_ch {
            return Err(Error::Dimension(format!(
                "conv expects {} input channels, got {c}",
                self.in_ch
            )));
        }
        let pad = self.kernel / 2;
        let mut out = Tensor3::zeros(self.out_ch, h, w);
        for o in 0..self.out_ch {
            let plane = out.channel_mut(o);
            plane.fill(self.bias[o]);
            for i in 0..self.in_ch {
                let src = x.channel(i);
                for ky in 0..self.kernel {
                    for kx in 0..self.kernel {
                        let wt = self.w(o, i, ky, kx);
                        if wt == 0.0 {
                            continue;
                        }
                        for y in 0..h {
                            let sy = y + ky;
                            if sy < pad || sy - pad >= h {
                                continue;
                            }
                            let src_row = &src[(sy - pad) * w..(sy - pad + 1) * w];
                            let dst_row = &mut plane[y * w..(y + 1) * w];
                            for (xo, d) in dst_row.iter_mut().enumerate() {
                                let sx = xo + kx;
                                if sx >= pad && sx - pad < w {
                                    *d += wt * src_row[sx - pad];
                                }
                            }
                        }
                    }
                }
            }
            for v in plane.iter_mut() {
                *v = self.activation.apply(*v);
            }
        }
        Ok(out)
    }

    /// Given the layer input, its output and `dL/dout`, returns `dL/dinput`
    /// and accumulates `dL/dweights`, `dL/dbias` into `grad`.
    pub fn backward(
        &self,
        x: &Tensor3,
        y: &Tensor3,
        upstream: &Tensor3,
        grad: &mut ConvLayerGrad,
    ) -> Result<Tensor3> {
        if !y.same_shape(upstream) || x.channels() != self.in_ch || y.channels() != self.out_ch {
            return Err(Error::Dimension("conv backward shapes disagree".into()));
        }
        let (_, h, w) = x.shape();
        let pad = self.kernel / 2;
        let mut delta = upstream.clone();
        for (d, &out) in delta.as_mut_slice().iter_mut().zip(y.as_slice()) {
            *d *= self.activation.slope_from_output(out);
        }
        let mut dx = Tensor3::zeros(self.in_ch, h, w);
        for o in 0..self.out_ch {
            let dplane = delta.channel(o);
            grad.bias[o] += dplane.iter().sum::<f64>();
            for i in 0..self.in_ch {
                let src = x.channel(i);
                for ky in 0..self.kernel {
                    for kx in 0..self.kernel {
                        let widx = ((o * self.in_ch + i) * self.kernel + ky) * self.kernel + kx;
                        let wt = self.weights[widx];
                        let mut gw = 0.0;
                        let dxi = dx.channel_mut(i);
                        for yy in 0..h {
                            let sy = yy + ky;
                            if sy < pad || sy - pad >= h {
                                continue;
                            }
                            let sy = sy - pad;
                            for xx in 0..w {
                                let sx = xx + kx;
                                if sx < pad || sx - pad >= w {
                                    continue;
                                }
                                let sx = sx - pad;
                                let d = dplane[yy * w + xx];
                                gw += d * src[sy * w + sx];
                                dxi[sy * w + sx] += wt * d;
                            }
                        }
                        grad.weights[widx] += gw;
                    }
                }
            }
        }
        Ok(dx)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayerGrad {
    pub fn zeros_like(layer: &ConvLayer) -> Self {
        Self {
            weights: vec![0.0; layer.weights.len()],
            bias: vec![0.0; layer.bias.len()],
        }
    }
}

/// Stack of convolutions applied in order.
pub type ConvParams = Vec<ConvLayer>;

/// Forward pass keeping every intermediate activation; `acts[0]` is the input.
pub fn conv_forward_cached(x: &Tensor3, layers: &[ConvLayer]) -> Result<Vec<Tensor3>> {
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(x.clone());
    for layer in layers {
        let next = layer.forward(acts.last().expect("non-empty"))?;
        acts.push(next);
    }
    Ok(acts)
}

pub fn conv_forward(x: &Tensor3, layers: &[ConvLayer]) -> Result<Tensor3> {
    let mut cur = x.clone();
    for layer in layers {
        cur = layer.forward(&cur)?;
    }
    Ok(cur)
}

/// Backward through a stack given the cached activations from
/// [`conv_forward_cached`]. Parameter gradients are accumulated into `grads`.
pub fn conv_backward(
    layers: &[ConvLayer],
    acts: &[Tensor3],
    upstream: &Tensor3,
    grads: &mut [ConvLayerGrad],
) -> Result<Tensor3> {
    if acts.len() != layers.len() + 1 || grads.len() != layers.len() {
        return Err(Error::Dimension(
            "activation cache does not match the stack".into(),
        ));
    }
    let mut g = upstream.clone();
    for (idx, layer) in layers.iter().enumerate().rev() {
        g = layer.backward(&acts[idx], &acts[idx + 1], &g, &mut grads[idx])?;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_tensor(rng: &mut RngStream, c: usize, h: usize, w: usize) -> Tensor3 {
        Tensor3::new(c, h, w, (0..c * h * w).map(|_| rng.uniform()).collect()).unwrap()
    }

    #[test]
    fn identity_kernel() {
        let mut layer = ConvLayer::zeros(1, 1, 3, Activation::Identity);
        layer.weights[4] = 1.0;
        let mut rng = RngStream::new(1);
        let x = random_tensor(&mut rng, 1, 5, 4);
        assert_eq!(layer.forward(&x).unwrap(), x);
    }

    #[test]
    fn zero_weights_give_sigmoid_bias() {
        let mut layer = ConvLayer::zeros(2, 3, 3, Activation::Sigmoid);
        layer.bias = vec![0.0, 1.5];
        let mut rng = RngStream::new(2);
        let y = layer.forward(&random_tensor(&mut rng, 3, 4, 4)).unwrap();
        assert!(y.channel(0).iter().all(|&v| v == 0.5));
        let s = 1.0 / (1.0 + (-1.5f64).exp());
        assert!(y.channel(1).iter().all(|&v| v == s));
    }

    #[test]
    fn forward_matches_direct_sum() {
        let mut rng = RngStream::new(3);
        let layer = ConvLayer::random(2, 3, 3, Activation::Identity, &mut rng);
        let x = random_tensor(&mut rng, 3, 5, 6);
        let y = layer.forward(&x).unwrap();
        for o in 0..2 {
            for yy in 0..5i64 {
                for xx in 0..6i64 {
                    let mut s = layer.bias[o];
                    for i in 0..3 {
                        for ky in 0..3i64 {
                            for kx in 0..3i64 {
                                let (sy, sx) = (yy + ky - 1, xx + kx - 1);
                                if (0..5).contains(&sy) && (0..6).contains(&sx) {
                                    s += layer.w(o, i, ky as usize, kx as usize)
                                        * x.get(i, sy as usize, sx as usize);
                                }
                            }
                        }
                    }
                    assert!((y.get(o, yy as usize, xx as usize) - s).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = RngStream::new(4);
        let layers = vec![
            ConvLayer::random(3, 2, 3, Activation::Sigmoid, &mut rng),
            ConvLayer::random(2, 3, 3, Activation::Sigmoid, &mut rng),
        ];
        let x = random_tensor(&mut rng, 2, 4, 5);
        let up = random_tensor(&mut rng, 2, 4, 5);
        let loss = |ls: &[ConvLayer], xx: &Tensor3| {
            let y = conv_forward(xx, ls).unwrap();
            y.as_slice()
                .iter()
                .zip(up.as_slice())
                .map(|(a, b)| a * b)
                .sum::<f64>()
        };
        let acts = conv_forward_cached(&x, &layers).unwrap();
        let mut grads: Vec<_> = layers.iter().map(ConvLayerGrad::zeros_like).collect();
        let dx = conv_backward(&layers, &acts, &up, &mut grads).unwrap();

        let h = 1e-6;
        let check = |fd: f64, an: f64| {
            assert!(
                (fd - an).abs() <= 1e-5 * fd.abs().max(an.abs()).max(1e-3),
                "{fd} vs {an}"
            );
        };
        for l in 0..2 {
            for k in 0..layers[l].weights.len() {
                let mut a = layers.clone();
                a[l].weights[k] += h;
                let mut b = layers.clone();
                b[l].weights[k] -= h;
                check(
                    (loss(&a, &x) - loss(&b, &x)) / (2.0 * h),
                    grads[l].weights[k],
                );
            }
            for k in 0..layers[l].bias.len() {
                let mut a = layers.clone();
                a[l].bias[k] += h;
                let mut b = layers.clone();
                b[l].bias[k] -= h;
                check((loss(&a, &x) - loss(&b, &x)) / (2.0 * h), grads[l].bias[k]);
            }
        }
        for k in 0..x.as_slice().len() {
            let mut a = x.clone();
            a.as_mut_slice()[k] += h;
            let mut b = x.clone();
            b.as_mut_slice()[k] -= h;
            check(
                (loss(&layers, &a) - loss(&layers, &b)) / (2.0 * h),
                dx.as_slice()[k],
            );
        }
    }

    #[test]
    fn shape_errors() {
        let layer = ConvLayer::zeros(2, 3, 3, Activation::Sigmoid);
        assert!(layer.forward(&Tensor3::zeros(2, 4, 4)).is_err());
        assert!(ConvLayer::new(1, 1, 2, vec![0.0; 4], vec![0.0], Activation::Sigmoid).is_err());
        assert!(ConvLayer::new(1, 1, 3, vec![0.0; 8], vec![0.0], Activation::Sigmoid).is_err());
    }
}
