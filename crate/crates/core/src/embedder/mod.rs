//! The embedding network: a fixed stack mapping a 48x48 grayscale image to a
//! k-dimensional joint representation, plus the shallow classifier head used
//! for cross-entropy training.
//!
//! Shape arithmetic: 48x48 -> conv 5x5 -> 44x44 -> pool -> 22x22 ->
//! conv 5x5 -> 18x18 -> pool -> 9x9; flatten 64*81 = 5184 -> 256 -> 64 -> k.

pub mod io;

use crate::error::{Error, Result};
use crate::kernels::{
    conv2d_backward, conv2d_forward, linear_backward, linear_forward, maxpool2_backward,
    maxpool2_forward, prelu_backward, prelu_forward, softmax, Tensor,
};
use crate::rng;
use rand::Rng;

pub const INPUT_SIDE: usize = 48;
pub const CONV1_CHANNELS: usize = 32;
pub const CONV2_CHANNELS: usize = 64;
pub const KERNEL_SIDE: usize = 5;
pub const FLAT_LEN: usize = CONV2_CHANNELS * 9 * 9;
pub const FC1_WIDTH: usize = 256;
pub const FC2_WIDTH: usize = 64;
pub const DEFAULT_EMBEDDING_DIM: usize = 8;

/// Convolution block parameters: kernel weights, per-channel bias, and the
/// slopes of the PReLU that follows.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock {
    pub weights: Tensor,
    pub bias: Vec<f64>,
    pub slopes: Vec<f64>,
}

/// Linear block parameters; `slopes` is empty for the output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBlock {
    pub weights: Tensor,
    pub bias: Vec<f64>,
    pub slopes: Vec<f64>,
}

/// All learnable weights of the embedding network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub conv1: ConvBlock,
    pub conv2: ConvBlock,
    pub fc1: LinearBlock,
    pub fc2: LinearBlock,
    pub fc3: LinearBlock,
    pub embedding_dim: usize,
}

/// Shallow classifier head: PReLU over the embedding, then a fully-connected
/// layer whose width is the joint-class cardinality.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub slopes: Vec<f64>,
    pub weights: Tensor,
    pub bias: Vec<f64>,
}

/// k-dimensional joint representation of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub values: Vec<f64>,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

fn init_uniform(rng: &mut rand_chacha::ChaCha8Rng, n: usize, fan_in: usize) -> Vec<f64> {
    let bound = (1.0 / fan_in as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
}

impl ModelParams {
    /// Seeded initialization: uniform +-sqrt(1/fan_in) weights, zero biases,
    /// PReLU slopes 0.25.
    pub fn init(embedding_dim: usize, seed: u64) -> Result<Self> {
        if embedding_dim == 0 {
            return Err(Error::Config("embedding_dim must be positive".into()));
        }
        let mut r = rng::stream(rng::derive_seed(seed, "model-init", 0));
        let k5 = KERNEL_SIDE * KERNEL_SIDE;
        let conv1 = ConvBlock {
            weights: Tensor::from_vec(
                &[CONV1_CHANNELS, 1, KERNEL_SIDE, KERNEL_SIDE],
                init_uniform(&mut r, CONV1_CHANNELS * k5, k5),
            )?,
            bias: vec![0.0; CONV1_CHANNELS],
            slopes: vec![0.25; CONV1_CHANNELS],
        };
        let conv2 = ConvBlock {
            weights: Tensor::from_vec(
                &[CONV2_CHANNELS, CONV1_CHANNELS, KERNEL_SIDE, KERNEL_SIDE],
                init_uniform(
                    &mut r,
                    CONV2_CHANNELS * CONV1_CHANNELS * k5,
                    CONV1_CHANNELS * k5,
                ),
            )?,
            bias: vec![0.0; CONV2_CHANNELS],
            slopes: vec![0.25; CONV2_CHANNELS],
        };
        let fc1 = LinearBlock {
            weights: Tensor::from_vec(
                &[FC1_WIDTH, FLAT_LEN],
                init_uniform(&mut r, FC1_WIDTH * FLAT_LEN, FLAT_LEN),
            )?,
            bias: vec![0.0; FC1_WIDTH],
            slopes: vec![0.25; FC1_WIDTH],
        };
        let fc2 = LinearBlock {
            weights: Tensor::from_vec(
                &[FC2_WIDTH, FC1_WIDTH],
                init_uniform(&mut r, FC2_WIDTH * FC1_WIDTH, FC1_WIDTH),
            )?,
            bias: vec![0.0; FC2_WIDTH],
            slopes: vec![0.25; FC2_WIDTH],
        };
        let fc3 = LinearBlock {
            weights: Tensor::from_vec(
                &[embedding_dim, FC2_WIDTH],
                init_uniform(&mut r, embedding_dim * FC2_WIDTH, FC2_WIDTH),
            )?,
            bias: vec![0.0; embedding_dim],
            slopes: vec![],
        };
        Ok(ModelParams {
            conv1,
            conv2,
            fc1,
            fc2,
            fc3,
            embedding_dim,
        })
    }

    /// Mutable views of every parameter block, in the declared (serialized) order.
    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.conv1.weights.data_mut(),
            &mut self.conv1.bias,
            &mut self.conv1.slopes,
            self.conv2.weights.data_mut(),
            &mut self.conv2.bias,
            &mut self.conv2.slopes,
            self.fc1.weights.data_mut(),
            &mut self.fc1.bias,
            &mut self.fc1.slopes,
            self.fc2.weights.data_mut(),
            &mut self.fc2.bias,
            &mut self.fc2.slopes,
            self.fc3.weights.data_mut(),
            &mut self.fc3.bias,
        ]
    }

    /// Immutable views of every parameter block, in the declared order.
    pub fn blocks(&self) -> Vec<&[f64]> {
        vec![
            self.conv1.weights.data(),
            &self.conv1.bias,
            &self.conv1.slopes,
            self.conv2.weights.data(),
            &self.conv2.bias,
            &self.conv2.slopes,
            self.fc1.weights.data(),
            &self.fc1.bias,
            &self.fc1.slopes,
            self.fc2.weights.data(),
            &self.fc2.bias,
            &self.fc2.slopes,
            self.fc3.weights.data(),
            &self.fc3.bias,
        ]
    }

    pub fn n_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }
}

impl ClassifierHead {
    /// Head over a k-dimensional embedding and `n_classes` joint classes.
    pub fn init(embedding_dim: usize, n_classes: usize, seed: u64) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::Config(format!(
                "classifier head needs at least 2 classes, got {n_classes}"
            )));
        }
        let mut r = rng::stream(rng::derive_seed(seed, "head-init", 0));
        Ok(ClassifierHead {
            slopes: vec![0.25; embedding_dim],
            weights: Tensor::from_vec(
                &[n_classes, embedding_dim],
                init_uniform(&mut r, n_classes * embedding_dim, embedding_dim),
            )?,
            bias: vec![0.0; n_classes],
        })
    }

    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.slopes, self.weights.data_mut(), &mut self.bias]
    }

    pub fn blocks(&self) -> Vec<&[f64]> {
        vec![&self.slopes, self.weights.data(), &self.bias]
    }
}

/// Cached activations of one forward pass, consumed by [`backward`].
pub struct ForwardTrace {
    input: Tensor,
    conv1_pre: Tensor,
    pool1_argmax: Vec<usize>,
    pool1_out: Tensor,
    conv2_pre: Tensor,
    pool2_argmax: Vec<usize>,
    flat: Vec<f64>,
    fc1_pre: Vec<f64>,
    fc1_post: Vec<f64>,
    fc2_pre: Vec<f64>,
    fc2_post: Vec<f64>,
    embedding: Vec<f64>,
}

impl ForwardTrace {
    pub fn embedding(&self) -> Embedding {
        Embedding {
            values: self.embedding.clone(),
        }
    }
}

/// Per-parameter gradients, shaped like [`ModelParams`].
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub conv1_w: Tensor,
    pub conv1_b: Vec<f64>,
    pub conv1_s: Vec<f64>,
    pub conv2_w: Tensor,
    pub conv2_b: Vec<f64>,
    pub conv2_s: Vec<f64>,
    pub fc1_w: Tensor,
    pub fc1_b: Vec<f64>,
    pub fc1_s: Vec<f64>,
    pub fc2_w: Tensor,
    pub fc2_b: Vec<f64>,
    pub fc2_s: Vec<f64>,
    pub fc3_w: Tensor,
    pub fc3_b: Vec<f64>,
}

impl ModelGrads {
    pub fn zeros_like(params: &ModelParams) -> Self {
        ModelGrads {
            conv1_w: Tensor::zeros(params.conv1.weights.shape()),
            conv1_b: vec![0.0; params.conv1.bias.len()],
            conv1_s: vec![0.0; params.conv1.slopes.len()],
            conv2_w: Tensor::zeros(params.conv2.weights.shape()),
            conv2_b: vec![0.0; params.conv2.bias.len()],
            conv2_s: vec![0.0; params.conv2.slopes.len()],
            fc1_w: Tensor::zeros(params.fc1.weights.shape()),
            fc1_b: vec![0.0; params.fc1.bias.len()],
            fc1_s: vec![0.0; params.fc1.slopes.len()],
            fc2_w: Tensor::zeros(params.fc2.weights.shape()),
            fc2_b: vec![0.0; params.fc2.bias.len()],
            fc2_s: vec![0.0; params.fc2.slopes.len()],
            fc3_w: Tensor::zeros(params.fc3.weights.shape()),
            fc3_b: vec![0.0; params.fc3.bias.len()],
        }
    }

    /// Views in the same order as [`ModelParams::blocks`].
    pub fn blocks(&self) -> Vec<&[f64]> {
        vec![
            self.conv1_w.data(),
            &self.conv1_b,
            &self.conv1_s,
            self.conv2_w.data(),
            &self.conv2_b,
            &self.conv2_s,
            self.fc1_w.data(),
            &self.fc1_b,
            &self.fc1_s,
            self.fc2_w.data(),
            &self.fc2_b,
            &self.fc2_s,
            self.fc3_w.data(),
            &self.fc3_b,
        ]
    }

    /// Accumulates `other` into `self`.
    pub fn add_assign(&mut self, other: &ModelGrads) {
        let mut dst = vec![
            self.conv1_w.data_mut(),
            &mut self.conv1_b[..],
            &mut self.conv1_s[..],
            self.conv2_w.data_mut(),
            &mut self.conv2_b[..],
            &mut self.conv2_s[..],
            self.fc1_w.data_mut(),
            &mut self.fc1_b[..],
            &mut self.fc1_s[..],
            self.fc2_w.data_mut(),
            &mut self.fc2_b[..],
            &mut self.fc2_s[..],
            self.fc3_w.data_mut(),
            &mut self.fc3_b[..],
        ];
        for (d, s) in dst.iter_mut().zip(other.blocks()) {
            for (a, b) in d.iter_mut().zip(s) {
                *a += b;
            }
        }
    }

    /// Scales every gradient by `factor`.
    pub fn scale(&mut self, factor: f64) {
        let mut dst = vec![
            self.conv1_w.data_mut(),
            &mut self.conv1_b[..],
            &mut self.conv1_s[..],
            self.conv2_w.data_mut(),
            &mut self.conv2_b[..],
            &mut self.conv2_s[..],
            self.fc1_w.data_mut(),
            &mut self.fc1_b[..],
            &mut self.fc1_s[..],
            self.fc2_w.data_mut(),
            &mut self.fc2_b[..],
            &mut self.fc2_s[..],
            self.fc3_w.data_mut(),
            &mut self.fc3_b[..],
        ];
        for d in dst.iter_mut() {
            for a in d.iter_mut() {
                *a *= factor;
            }
        }
    }
}

fn check_input(image: &Tensor) -> Result<()> {
    let s = image.shape();
    let ok = s == [1, INPUT_SIDE, INPUT_SIDE] || s == [INPUT_SIDE, INPUT_SIDE];
    if !ok {
        return Err(Error::shape(
            "embed",
            format!("expected a {INPUT_SIDE}x{INPUT_SIDE} grayscale image, got {s:?}"),
        ));
    }
    Ok(())
}

/// Runs the forward pass and caches everything backward needs.
pub fn forward(image: &Tensor, params: &ModelParams) -> Result<ForwardTrace> {
    check_input(image)?;
    let input = image
        .clone()
        .reshaped(&[1, INPUT_SIDE, INPUT_SIDE])?;

    let conv1_pre = conv2d_forward(&input, &params.conv1.weights, &params.conv1.bias)?;
    let a1 = prelu_forward(conv1_pre.data(), &params.conv1.slopes, 44 * 44)?;
    let (pool1_out, pool1_argmax) =
        maxpool2_forward(&Tensor::from_vec(&[CONV1_CHANNELS, 44, 44], a1)?)?;

    let conv2_pre = conv2d_forward(&pool1_out, &params.conv2.weights, &params.conv2.bias)?;
    let a2 = prelu_forward(conv2_pre.data(), &params.conv2.slopes, 18 * 18)?;
    let (pool2_out, pool2_argmax) =
        maxpool2_forward(&Tensor::from_vec(&[CONV2_CHANNELS, 18, 18], a2)?)?;

    let flat = pool2_out.into_data();
    let fc1_pre = linear_forward(&flat, &params.fc1.weights, &params.fc1.bias)?;
    let fc1_post = prelu_forward(&fc1_pre, &params.fc1.slopes, 1)?;
    let fc2_pre = linear_forward(&fc1_post, &params.fc2.weights, &params.fc2.bias)?;
    let fc2_post = prelu_forward(&fc2_pre, &params.fc2.slopes, 1)?;
    let embedding = linear_forward(&fc2_post, &params.fc3.weights, &params.fc3.bias)?;

    if embedding.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("embedding forward pass"));
    }
    Ok(ForwardTrace {
        input,
        conv1_pre,
        pool1_argmax,
        pool1_out,
        conv2_pre,
        pool2_argmax,
        flat,
        fc1_pre,
        fc1_post,
        fc2_pre,
        fc2_post,
        embedding,
    })
}

/// Maps one image to its joint representation. Pure in (image, params).
pub fn embed(image: &Tensor, params: &ModelParams) -> Result<Embedding> {
    Ok(forward(image, params)?.embedding())
}

/// Reverse-mode pass through the fixed layer sequence.
///
/// `d_embedding` is dL/d(embedding); returns gradients for every parameter.
pub fn backward(trace: &ForwardTrace, params: &ModelParams, d_embedding: &[f64]) -> Result<ModelGrads> {
    if d_embedding.len() != params.embedding_dim {
        return Err(Error::shape(
            "backward",
            format!(
                "gradient length {} vs embedding dim {}",
                d_embedding.len(),
                params.embedding_dim
            ),
        ));
    }

    let (d_fc2_post, fc3_w, fc3_b) =
        linear_backward(&trace.fc2_post, &params.fc3.weights, d_embedding)?;
    let (d_fc2_pre, fc2_s) =
        prelu_backward(&trace.fc2_pre, &params.fc2.slopes, 1, &d_fc2_post)?;
    let (d_fc1_post, fc2_w, fc2_b) =
        linear_backward(&trace.fc1_post, &params.fc2.weights, &d_fc2_pre)?;
    let (d_fc1_pre, fc1_s) =
        prelu_backward(&trace.fc1_pre, &params.fc1.slopes, 1, &d_fc1_post)?;
    let (d_flat, fc1_w, fc1_b) = linear_backward(&trace.flat, &params.fc1.weights, &d_fc1_pre)?;

    let d_pool2 = Tensor::from_vec(&[CONV2_CHANNELS, 9, 9], d_flat)?;
    let d_a2 = maxpool2_backward(&[CONV2_CHANNELS, 18, 18], &trace.pool2_argmax, &d_pool2)?;
    let (d_conv2_pre, conv2_s) =
        prelu_backward(trace.conv2_pre.data(), &params.conv2.slopes, 18 * 18, d_a2.data())?;
    let (d_pool1, conv2_w, conv2_b) = conv2d_backward(
        &trace.pool1_out,
        &params.conv2.weights,
        &Tensor::from_vec(&[CONV2_CHANNELS, 18, 18], d_conv2_pre)?,
    )?;

    let d_a1 = maxpool2_backward(&[CONV1_CHANNELS, 44, 44], &trace.pool1_argmax, &d_pool1)?;
    let (d_conv1_pre, conv1_s) =
        prelu_backward(trace.conv1_pre.data(), &params.conv1.slopes, 44 * 44, d_a1.data())?;
    let (_, conv1_w, conv1_b) = conv2d_backward(
        &trace.input,
        &params.conv1.weights,
        &Tensor::from_vec(&[CONV1_CHANNELS, 44, 44], d_conv1_pre)?,
    )?;

    Ok(ModelGrads {
        conv1_w,
        conv1_b,
        conv1_s,
        conv2_w,
        conv2_b,
        conv2_s,
        fc1_w,
        fc1_b,
        fc1_s,
        fc2_w,
        fc2_b,
        fc2_s,
        fc3_w,
        fc3_b,
    })
}

/// Class-probability vector for one embedding under the classifier head.
pub fn classify(embedding: &Embedding, head: &ClassifierHead) -> Result<Vec<f64>> {
    let logits = head_logits(embedding, head)?;
    Ok(softmax(&logits.logits))
}

/// Cached head activations for the backward pass.
pub struct HeadTrace {
    pub activated: Vec<f64>,
    pub logits: Vec<f64>,
}

/// PReLU on the embedding, then the fully-connected layer. Softmax is the
/// caller's business (loss or probability, whichever is needed).
pub fn head_logits(embedding: &Embedding, head: &ClassifierHead) -> Result<HeadTrace> {
    if head.slopes.len() != embedding.dim() {
        return Err(Error::shape(
            "classify",
            format!(
                "head expects {} dims, embedding has {}",
                head.slopes.len(),
                embedding.dim()
            ),
        ));
    }
    let activated = prelu_forward(&embedding.values, &head.slopes, 1)?;
    let logits = linear_forward(&activated, &head.weights, &head.bias)?;
    Ok(HeadTrace { activated, logits })
}

/// Gradients of the head and of the embedding, given dL/d_logits.
pub struct HeadGrads {
    pub slopes: Vec<f64>,
    pub weights: Tensor,
    pub bias: Vec<f64>,
    pub d_embedding: Vec<f64>,
}

pub fn head_backward(
    embedding: &Embedding,
    head: &ClassifierHead,
    trace: &HeadTrace,
    d_logits: &[f64],
) -> Result<HeadGrads> {
    let (d_activated, weights, bias) = linear_backward(&trace.activated, &head.weights, d_logits)?;
    let (d_embedding, slopes) = prelu_backward(&embedding.values, &head.slopes, 1, &d_activated)?;
    Ok(HeadGrads {
        slopes,
        weights,
        bias,
        d_embedding,
    })
}
