use super::Prv;
use crate::error::{Error, Result};

/// Row-major strides for the given dimension sizes; the last dimension varies fastest.
pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

pub fn encode(dims: &[usize], assignment: &[usize]) -> usize {
    debug_assert_eq!(dims.len(), assignment.len());
    assignment
        .iter()
        .zip(strides(dims))
        .map(|(&v, s)| v * s)
        .sum()
}

pub fn decode(dims: &[usize], mut index: usize) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for i in (0..dims.len()).rev() {
        out[i] = index % dims[i];
        index /= dims[i];
    }
    out
}

/// A dense potential function over the joint range of its arguments.
///
/// Values are stored row-major in argument order, last argument fastest:
/// for two boolean arguments the order is (f,f), (f,t), (t,f), (t,t).
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialTable {
    args: Vec<Prv>,
    values: Vec<f64>,
}

impl PotentialTable {
    pub fn new(args: Vec<Prv>, values: Vec<f64>) -> Result<Self> {
        let expected: usize = args.iter().map(|a| a.range().len()).product();
        if values.len() != expected {
            return Err(Error::invalid(format!(
                "potential table has {} values, argument ranges require {expected}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!(
                "potentials must be finite and non-negative, got {v}"
            )));
        }
        Ok(PotentialTable { args, values })
    }

    pub fn args(&self) -> &[Prv] {
        &self.args
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dims(&self) -> Vec<usize> {
        self.args.iter().map(|a| a.range().len()).collect()
    }

    pub fn index_of(&self, assignment: &[usize]) -> usize {
        encode(&self.dims(), assignment)
    }

    pub fn assignment(&self, index: usize) -> Vec<usize> {
        decode(&self.dims(), index)
    }

    pub fn value(&self, assignment: &[usize]) -> f64 {
        self.values[self.index_of(assignment)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Logvar, Range};
    use proptest::prelude::*;

    #[test]
    fn last_argument_varies_fastest() {
        let a = Prv::new("A", vec![], Range::boolean());
        let b = Prv::new(
            "B",
            vec![Logvar::new("X")],
            Range::new(["x", "y", "z"]).unwrap(),
        );
        let t = PotentialTable::new(vec![a, b], (0..6).map(f64::from).collect()).unwrap();
        assert_eq!(t.value(&[0, 2]), 2.0);
        assert_eq!(t.value(&[1, 0]), 3.0);
        assert_eq!(t.assignment(4), vec![1, 1]);
    }

    #[test]
    fn rejects_bad_tables() {
        let a = Prv::new("A", vec![], Range::boolean());
        assert!(PotentialTable::new(vec![a.clone()], vec![1.0]).is_err());
        assert!(PotentialTable::new(vec![a.clone()], vec![1.0, -0.5]).is_err());
        assert!(PotentialTable::new(vec![a], vec![1.0, f64::NAN]).is_err());
        assert_eq!(
            PotentialTable::new(vec![], vec![2.0]).unwrap().values(),
            &[2.0]
        );
    }

    proptest! {
        #[test]
        fn index_round_trip(dims in proptest::collection::vec(1usize..5, 0..5), seed in any::<usize>()) {
            let total: usize = dims.iter().product();
            let idx = seed % total;
            let a = decode(&dims, idx);
            prop_assert!(a.iter().zip(&dims).all(|(v, d)| v < d));
            prop_assert_eq!(encode(&dims, &a), idx);
        }
    }
}
