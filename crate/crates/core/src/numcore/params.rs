use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::Tensor;

/// Handle to one parameter slot in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named parameters with parallel gradient accumulators.
///
/// Slots keep their insertion index for the lifetime of the store, so a
/// [`ParamId`] stays valid across clones. Iteration is by name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    grads: Vec<Tensor>,
    by_name: BTreeMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter `{name}`")));
        }
        let slot = self.values.len();
        self.grads.push(Tensor::zeros(value.shape()));
        self.values.push(value);
        self.by_name.insert(name.clone(), slot);
        self.names.push(name);
        Ok(ParamId(slot))
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.by_name
            .get(name)
            .map(|&s| ParamId(s))
            .ok_or_else(|| Error::UnknownParam(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.grads[id.0]
    }

    /// Parameter ids ordered by name.
    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.by_name.values().map(|&s| ParamId(s))
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn zero_grads(&mut self) {
        self.grads.iter_mut().for_each(|g| g.fill(0.0));
    }

    /// Adds `scale * grads` into the accumulators.
    pub fn accumulate(&mut self, grads: &Gradients, scale: f64) -> Result<()> {
        for (slot, g) in grads.slots.iter().enumerate() {
            if let Some(g) = g {
                let acc = self
                    .grads
                    .get_mut(slot)
                    .ok_or_else(|| Error::UnknownParam(format!("slot {slot}")))?;
                if !acc.same_shape(g) {
                    return Err(Error::shape(
                        "accumulate",
                        format!("`{}` {:?} vs {:?}", self.names[slot], acc.shape(), g.shape()),
                    ));
                }
                acc.add_scaled(g, scale);
            }
        }
        Ok(())
    }

    /// Appends rows to a matrix parameter (and zero rows to its gradient).
    pub fn append_rows(&mut self, id: ParamId, rows: &Tensor) -> Result<()> {
        self.values[id.0].append_rows(rows)?;
        self.grads[id.0].append_rows(&Tensor::zeros(rows.shape()))
    }

    /// Copies every value from `other`; both stores must share a layout.
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<()> {
        self.check_layout(other)?;
        for (dst, src) in self.values.iter_mut().zip(&other.values) {
            dst.data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }

    pub fn check_layout(&self, other: &ParamStore) -> Result<()> {
        if self.names != other.names {
            return Err(Error::shape("param layout", "parameter names differ"));
        }
        for (i, (a, b)) in self.values.iter().zip(&other.values).enumerate() {
            if !a.same_shape(b) {
                return Err(Error::shape(
                    "param layout",
                    format!("`{}` {:?} vs {:?}", self.names[i], a.shape(), b.shape()),
                ));
            }
        }
        Ok(())
    }

    /// Largest absolute difference between the values of two stores.
    pub fn max_abs_diff(&self, other: &ParamStore) -> Result<f64> {
        self.check_layout(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max))
    }

    pub(crate) fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub(crate) fn values_and_grads_mut(&mut self) -> (&mut [Tensor], &[Tensor]) {
        (&mut self.values, &self.grads)
    }

    pub(crate) fn grads(&self) -> &[Tensor] {
        &self.grads
    }

    pub(crate) fn grads_mut(&mut self) -> &mut [Tensor] {
        &mut self.grads
    }
}

/// Per-parameter gradients produced by one backward pass.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    pub(crate) slots: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn empty(len: usize) -> Self {
        Self { slots: vec![None; len] }
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.slots.get(id.0).and_then(Option::as_ref)
    }

    pub fn set(&mut self, id: ParamId, grad: Tensor) {
        if self.slots.len() <= id.0 {
            self.slots.resize(id.0 + 1, None);
        }
        self.slots[id.0] = Some(grad);
    }

    /// Adds `scale * other` in slot order.
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        if self.slots.len() < other.slots.len() {
            self.slots.resize(other.slots.len(), None);
        }
        for (dst, src) in self.slots.iter_mut().zip(&other.slots) {
            if let Some(src) = src {
                match dst {
                    Some(d) => d.add_scaled(src, scale),
                    None => {
                        let mut t = Tensor::zeros(src.shape());
                        t.add_scaled(src, scale);
                        *dst = Some(t);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iterates_by_name_and_keeps_ids() {
        let mut s = ParamStore::new();
        let b = s.insert("b", Tensor::zeros(&[2])).unwrap();
        let a = s.insert("a", Tensor::zeros(&[3])).unwrap();
        let order: Vec<_> = s.ids().collect();
        assert_eq!(order, vec![a, b]);
        assert_eq!(s.id("b").unwrap(), b);
        assert!(s.insert("a", Tensor::zeros(&[1])).is_err());
        assert!(matches!(s.id("zz"), Err(Error::UnknownParam(_))));
    }

    #[test]
    fn accumulate_checks_shapes() {
        let mut s = ParamStore::new();
        let a = s.insert("a", Tensor::zeros(&[2])).unwrap();
        let mut g = Gradients::empty(1);
        g.set(a, Tensor::vector(vec![1.0, 2.0]));
        s.accumulate(&g, 0.5).unwrap();
        assert_eq!(s.grad(a).data(), &[0.5, 1.0]);
        g.set(a, Tensor::vector(vec![1.0]));
        assert!(s.accumulate(&g, 1.0).is_err());
    }
}
