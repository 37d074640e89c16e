//! Flat views over named parameter blocks, shared by SGD and the
//! finite-difference checks.

pub trait ParamSet: Clone + Send + Sync {
    fn slices(&self) -> Vec<&[f64]>;
    fn slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn len(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    fn fill(&mut self, v: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|x| *x = v);
        }
    }

    /// `self += alpha * other`
    fn axpy(&mut self, alpha: f64, other: &Self) {
        for (dst, src) in self.slices_mut().into_iter().zip(other.slices()) {
            crate::math::axpy(alpha, src, dst);
        }
    }

    fn get_flat(&self, mut i: usize) -> f64 {
        for s in self.slices() {
            if i < s.len() {
                return s[i];
            }
            i -= s.len();
        }
        panic!("parameter index out of range")
    }

    fn set_flat(&mut self, mut i: usize, v: f64) {
        for s in self.slices_mut() {
            if i < s.len() {
                s[i] = v;
                return;
            }
            i -= s.len();
        }
        panic!("parameter index out of range")
    }

    fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }
}

macro_rules! impl_param_set {
    ($ty:ty { $($field:ident),+ $(,)? }) => {
        impl $crate::models::params::ParamSet for $ty {
            fn slices(&self) -> Vec<&[f64]> {
                vec![$(&self.$field[..]),+]
            }
            fn slices_mut(&mut self) -> Vec<&mut [f64]> {
                vec![$(&mut self.$field[..]),+]
            }
        }
    };
}
pub(crate) use impl_param_set;
