use crate::linalg::{set_block, Matrix, Vector};

use super::params::GbcsParams;

/// Joint state/costate dynamics `d/dt (X; Ψ) = Ā (X; Ψ) + B̄ u`.
///
/// Costates follow the convention `u_i = R_i^{-1}(B̃_i + C)^T ψ_i`,
/// `ψ_i(T) = -Q̃_iT X(T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem {
    /// State dimension `H + 1` (the block size).
    pub n: usize,
    pub players: usize,
    pub a_bar: Matrix,
    pub b_bar: Vector,
}

impl AugmentedSystem {
    pub fn dim(&self) -> usize {
        self.n * (self.players + 1)
    }
}

/// Hamiltonian matrix of the boundary value problem, costates in the
/// convention `u_i = -R_i^{-1}(B̃_i + C)^T φ_i`, `φ_i(T) = Q̃_iT x(T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameMatrixM {
    pub n: usize,
    pub players: usize,
    pub m: Matrix,
}

pub fn assemble_augmented(p: &GbcsParams) -> AugmentedSystem {
    let n = p.n();
    let h = p.players();
    let size = n * (h + 1);
    let mut a_bar = Matrix::zeros(size, size);
    set_block(&mut a_bar, 0, 0, &p.a_tilde);
    let minus_at = -p.a_tilde.transpose();
    for i in 0..h {
        set_block(&mut a_bar, 0, i + 1, &p.coupling(i));
        set_block(&mut a_bar, i + 1, 0, &p.q[i]);
        set_block(&mut a_bar, i + 1, i + 1, &minus_at);
    }
    let mut b_bar = Vector::zeros(size);
    b_bar.rows_mut(0, n).copy_from(&p.b_tilde);
    AugmentedSystem {
        n,
        players: h,
        a_bar,
        b_bar,
    }
}

pub fn assemble_m(p: &GbcsParams) -> GameMatrixM {
    let n = p.n();
    let h = p.players();
    let size = n * (h + 1);
    let mut m = Matrix::zeros(size, size);
    set_block(&mut m, 0, 0, &p.a_tilde);
    let minus_at = -p.a_tilde.transpose();
    for i in 0..h {
        set_block(&mut m, 0, i + 1, &(-p.coupling(i)));
        set_block(&mut m, i + 1, 0, &(-&p.q[i]));
        set_block(&mut m, i + 1, i + 1, &minus_at);
    }
    GameMatrixM { n, players: h, m }
}

/// Negates every costate block of a stacked `(x; ψ_1; ...; ψ_H)` vector,
/// mapping between the two costate conventions.
pub fn flip_costates(y: &Vector, n: usize) -> Vector {
    let mut out = y.clone();
    for v in out.rows_mut(n, y.len() - n).iter_mut() {
        *v = -*v;
    }
    out
}
