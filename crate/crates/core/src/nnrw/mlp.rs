use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Output is `OUTPUT_SCALE * tanh(.)`.
pub const OUTPUT_SCALE: f64 = 3.0;

/// Two-hidden-layer perceptron `in -> h -> h -> 1` with tanh activations.
///
/// Parameters live in one flat vector: `w1 (h x in)`, `b1`, `w2 (h x h)`,
/// `b2`, `w3 (h)`, `b3`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    input: usize,
    hidden: usize,
    pub params: Vec<f64>,
}

struct Cache {
    a1: Vec<f64>,
    a2: Vec<f64>,
    out: f64,
}

impl Mlp {
    pub fn num_params(input: usize, hidden: usize) -> usize {
        hidden * input + hidden + hidden * hidden + hidden + hidden + 1
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input,
            hidden,
            params: vec![0.0; Self::num_params(input, hidden)],
        }
    }

    /// Uniform in `+-1/sqrt(fan_in)` for every weight and bias.
    pub fn init(input: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Self::zeros(input, hidden);
        let (_, w2, _, w3, _, end) = m.offsets();
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize| {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            for p in &mut m.params[range] {
                *p = rng.random_range(-bound..bound);
            }
        };
        fill(0..w2, input);
        fill(w2..w3, hidden);
        fill(w3..end, hidden);
        m
    }

    pub fn from_params(input: usize, hidden: usize, params: Vec<f64>) -> Option<Self> {
        (params.len() == Self::num_params(input, hidden)).then_some(Self {
            input,
            hidden,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    /// Start offsets of `b1, w2, b2, w3, b3` (and `w1` at zero).
    fn offsets(&self) -> (usize, usize, usize, usize, usize, usize) {
        let (i, h) = (self.input, self.hidden);
        let b1 = h * i;
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let w3 = b2 + h;
        let b3 = w3 + h;
        (b1, w2, b2, w3, b3, b3 + 1)
    }

    fn run(&self, x: &[f64]) -> Cache {
        assert_eq!(x.len(), self.input, "feature dimension mismatch");
        let (ob1, ow2, ob2, ow3, ob3, _) = self.offsets();
        let p = &self.params;
        let h = self.hidden;
        let mut a1 = p[ob1..ob1 + h].to_vec();
        for (k, &xk) in x.iter().enumerate() {
            if xk != 0.0 {
                for (j, a) in a1.iter_mut().enumerate() {
                    *a += p[j * self.input + k] * xk;
                }
            }
        }
        a1.iter_mut().for_each(|a| *a = a.tanh());
        let mut a2 = p[ob2..ob2 + h].to_vec();
        for (j, a) in a2.iter_mut().enumerate() {
            let row = &p[ow2 + j * h..ow2 + (j + 1) * h];
            *a += row.iter().zip(&a1).map(|(w, v)| w * v).sum::<f64>();
            *a = a.tanh();
        }
        let z = p[ob3]
            + p[ow3..ow3 + h]
                .iter()
                .zip(&a2)
                .map(|(w, v)| w * v)
                .sum::<f64>();
        Cache {
            a1,
            a2,
            out: OUTPUT_SCALE * z.tanh(),
        }
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        self.run(x).out
    }

    /// Outputs for each row of a row-major `n x input` matrix.
    pub fn forward_batch(&self, xs: &[f64]) -> Vec<f64> {
        xs.chunks(self.input.max(1))
            .map(|x| self.forward(x))
            .collect()
    }

    /// Adds `sum_i upstream[i] * d out(x_i) / d params` into `grad`.
    pub fn backward_batch(&self, xs: &[f64], upstream: &[f64], grad: &mut [f64]) {
        let (ob1, ow2, ob2, ow3, ob3, _) = self.offsets();
        let h = self.hidden;
        let p = &self.params;
        for (x, &g) in xs.chunks(self.input.max(1)).zip(upstream) {
            if g == 0.0 {
                continue;
            }
            let c = self.run(x);
            // d out / d z = 3 (1 - tanh^2) = (9 - out^2) / 3
            let dz = g * (OUTPUT_SCALE * OUTPUT_SCALE - c.out * c.out) / OUTPUT_SCALE;
            grad[ob3] += dz;
            let mut d2 = vec![0.0; h];
            for j in 0..h {
                grad[ow3 + j] += dz * c.a2[j];
                d2[j] = dz * p[ow3 + j] * (1.0 - c.a2[j] * c.a2[j]);
            }
            let mut d1 = vec![0.0; h];
            for j in 0..h {
                grad[ob2 + j] += d2[j];
                let row = ow2 + j * h;
                for k in 0..h {
                    grad[row + k] += d2[j] * c.a1[k];
                    d1[k] += d2[j] * p[row + k];
                }
            }
            for k in 0..h {
                d1[k] *= 1.0 - c.a1[k] * c.a1[k];
                grad[ob1 + k] += d1[k];
            }
            for (i, &xi) in x.iter().enumerate() {
                if xi != 0.0 {
                    for (j, d) in d1.iter().enumerate() {
                        grad[j * self.input + i] += d * xi;
                    }
                }
            }
        }
    }
}
