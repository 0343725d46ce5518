//! Ordering of the unknowns: periodic coefficients per field, then the
//! macroscopic strain and field.

/// Symmetric index pairs in row-major upper-triangular order.
pub fn sym_pairs(dim: usize) -> &'static [(usize, usize)] {
    match dim {
        2 => &[(0, 0), (0, 1), (1, 1)],
        _ => &[(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)],
    }
}

/// Position of `(a, b)` in [`sym_pairs`].
pub fn sym_index(dim: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    sym_pairs(dim).iter().position(|&p| p == (a, b)).expect("index pair within dimension")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofLayout {
    pub dim: usize,
    /// Periodic coefficients per scalar field.
    pub per_field: usize,
}

impl DofLayout {
    pub fn new(dim: usize, per_field: usize) -> Self {
        Self { dim, per_field }
    }

    pub fn fields(&self) -> usize {
        self.dim + 1
    }

    pub fn n_periodic(&self) -> usize {
        self.fields() * self.per_field
    }

    pub fn n_strain(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    pub fn n_global(&self) -> usize {
        self.n_strain() + self.dim
    }

    pub fn len(&self) -> usize {
        self.n_periodic() + self.n_global()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Field `f` is a displacement component for `f < dim`, the potential for `f == dim`.
    pub fn periodic(&self, field: usize, p: usize) -> usize {
        field * self.per_field + p
    }

    pub fn potential_field(&self) -> usize {
        self.dim
    }

    pub fn strain(&self, a: usize, b: usize) -> usize {
        self.n_periodic() + sym_index(self.dim, a, b)
    }

    pub fn efield(&self, b: usize) -> usize {
        self.n_periodic() + self.n_strain() + b
    }

    /// Index within the global block for a global dof.
    pub fn global_offset(&self) -> usize {
        self.n_periodic()
    }
}
