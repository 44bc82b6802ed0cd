use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, Uniform};

use super::{AutodiffError, Graph, Real, Tensor, Var};

/// Generator for one stream of a run seed. Streams are independent, so a
/// layer's initial weights do not depend on how many values earlier layers
/// drew.
pub fn init_seed(run_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    rng.set_stream(stream);
    rng
}

/// Named trainable tensors in registration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    seed: u64,
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new(seed: u64) -> Self {
        Self { seed, names: Vec::new(), tensors: Vec::new() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar count.
    pub fn n_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn push(&mut self, name: &str, t: Tensor<T>) -> usize {
        self.names.push(name.to_string());
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    /// Uniform in `±1/sqrt(fan_in)`, drawn from the stream numbered by the
    /// registration index.
    pub fn uniform(&mut self, name: &str, dims: &[usize], fan_in: usize) -> usize {
        let bound = 1.0 / libm::sqrt(fan_in.max(1) as f64);
        let mut rng = init_seed(self.seed, self.tensors.len() as u64);
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let data = (0..super::numel(dims)).map(|_| T::of(dist.sample(&mut rng))).collect();
        self.push(name, Tensor { dims: dims.to_vec(), data })
    }

    pub fn zeros(&mut self, name: &str, dims: &[usize]) -> usize {
        self.push(name, Tensor::zeros(dims))
    }

    pub fn ones(&mut self, name: &str, dims: &[usize]) -> usize {
        self.push(name, Tensor::full(dims, T::one()))
    }

    pub fn get(&self, i: usize) -> &Tensor<T> {
        &self.tensors[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Tensor<T> {
        &mut self.tensors[i]
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Records every tensor as a graph leaf; the returned handles follow
    /// registration order.
    pub fn bind(&self, g: &mut Graph<T>) -> Vec<Var> {
        self.tensors.iter().map(|t| g.param(t)).collect()
    }

    /// Gradients of the bound leaves after [`Graph::backward`].
    pub fn grads<'g>(&self, g: &'g Graph<T>, vars: &[Var]) -> Vec<Option<&'g [T]>> {
        vars.iter().map(|v| g.grad(*v)).collect()
    }

    /// Replaces the tensors with same-named, same-shaped ones.
    pub fn load(&mut self, entries: &[(String, Tensor<T>)]) -> Result<(), AutodiffError> {
        for (name, t) in entries {
            let i = self.index_of(name).ok_or(AutodiffError::ShapeMismatch("unknown parameter name"))?;
            if self.tensors[i].dims != t.dims {
                return Err(AutodiffError::ShapeMismatch("parameter dims differ"));
            }
            self.tensors[i] = t.clone();
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore { seed: self.seed, names: self.names.clone(), tensors: self.tensors.iter().map(Tensor::cast).collect() }
    }
}
