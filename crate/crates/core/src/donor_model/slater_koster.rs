//! Two-center hopping blocks in the Slater-Koster form.
//!
//! `hopping(a, b, c)` is ⟨a on atom 1|H|b on atom 2⟩ for direction cosines `c`
//! of the vector from atom 1 to atom 2. Entries with the lower angular
//! momentum first come from the standard table; the reverse ordering picks
//! up the parity factor (-1)^(l_a + l_b).

use super::basis::{Orbital, OrbitalBasis};
use super::params::{Channel, SkParameters};
use crate::scalar::Real;

fn p_index(o: Orbital) -> usize {
    match o {
        Orbital::Px => 0,
        Orbital::Py => 1,
        Orbital::Pz => 2,
        _ => unreachable!("not a p orbital"),
    }
}

/// s-like (s or s*) to d angular factor.
fn s_d<T: Real>(d: Orbital, c: [T; 3]) -> T {
    let [l, m, n] = c;
    let r3 = T::of(3f64.sqrt());
    let half = T::of(0.5);
    match d {
        Orbital::Dxy => r3 * l * m,
        Orbital::Dyz => r3 * m * n,
        Orbital::Dzx => r3 * n * l,
        Orbital::Dx2y2 => r3 * half * (l * l - m * m),
        Orbital::Dz2 => n * n - half * (l * l + m * m),
        _ => unreachable!("not a d orbital"),
    }
}

fn p_d<T: Real>(p: Orbital, d: Orbital, c: [T; 3], sigma: T, pi: T) -> T {
    let i = p_index(p);
    let [l, m, n] = c;
    let ci = c[i];
    let one = T::one();
    let two = T::of(2.0);
    let half = T::of(0.5);
    let r3 = T::of(3f64.sqrt());
    let delta = |a: usize| if a == i { one } else { T::zero() };
    let xy_type = |a: usize, b: usize| {
        let (ca, cb) = (c[a], c[b]);
        r3 * ci * ca * cb * sigma + (delta(a) * cb + delta(b) * ca - two * ci * ca * cb) * pi
    };
    match d {
        Orbital::Dxy => xy_type(0, 1),
        Orbital::Dyz => xy_type(1, 2),
        Orbital::Dzx => xy_type(2, 0),
        Orbital::Dx2y2 => {
            let lm = l * l - m * m;
            let pi_part = match i {
                0 => l * (one - lm),
                1 => -m * (one + lm),
                _ => -n * lm,
            };
            r3 * half * ci * lm * sigma + pi_part * pi
        }
        Orbital::Dz2 => {
            let f = n * n - half * (l * l + m * m);
            let pi_part = match i {
                0 => -r3 * l * n * n,
                1 => -r3 * m * n * n,
                _ => r3 * n * (l * l + m * m),
            };
            ci * f * sigma + pi_part * pi
        }
        _ => unreachable!("not a d orbital"),
    }
}

fn d_d<T: Real>(a: Orbital, b: Orbital, c: [T; 3], s: T, p: T, d: T) -> T {
    use Orbital::*;
    let [l, m, n] = c;
    let one = T::one();
    let two = T::of(2.0);
    let three = T::of(3.0);
    let four = T::of(4.0);
    let half = T::of(0.5);
    let r3 = T::of(3f64.sqrt());
    let (l2, m2, n2) = (l * l, m * m, n * n);
    let lm = l2 - m2;
    let fz = n2 - half * (l2 + m2);
    // order the pair so each unordered combination appears once below
    let rank = |o: Orbital| match o {
        Dxy => 0,
        Dyz => 1,
        Dzx => 2,
        Dx2y2 => 3,
        Dz2 => 4,
        _ => unreachable!("not a d orbital"),
    };
    let (a, b) = if rank(a) <= rank(b) { (a, b) } else { (b, a) };
    match (a, b) {
        (Dxy, Dxy) => three * l2 * m2 * s + (l2 + m2 - four * l2 * m2) * p + (n2 + l2 * m2) * d,
        (Dyz, Dyz) => three * m2 * n2 * s + (m2 + n2 - four * m2 * n2) * p + (l2 + m2 * n2) * d,
        (Dzx, Dzx) => three * n2 * l2 * s + (n2 + l2 - four * n2 * l2) * p + (m2 + n2 * l2) * d,
        (Dxy, Dyz) => {
            three * l * m2 * n * s + l * n * (one - four * m2) * p + l * n * (m2 - one) * d
        }
        (Dyz, Dzx) => {
            three * m * n2 * l * s + m * l * (one - four * n2) * p + m * l * (n2 - one) * d
        }
        (Dxy, Dzx) => {
            three * l2 * m * n * s + m * n * (one - four * l2) * p + m * n * (l2 - one) * d
        }
        (Dxy, Dx2y2) => T::of(1.5) * l * m * lm * s - two * l * m * lm * p + half * l * m * lm * d,
        (Dyz, Dx2y2) => {
            T::of(1.5) * m * n * lm * s - m * n * (one + two * lm) * p
                + m * n * (one + half * lm) * d
        }
        (Dzx, Dx2y2) => {
            T::of(1.5) * n * l * lm * s + n * l * (one - two * lm) * p
                - n * l * (one - half * lm) * d
        }
        (Dxy, Dz2) => {
            r3 * l * m * fz * s - two * r3 * l * m * n2 * p + half * r3 * l * m * (one + n2) * d
        }
        (Dyz, Dz2) => {
            r3 * m * n * fz * s + r3 * m * n * (l2 + m2 - n2) * p
                - half * r3 * m * n * (l2 + m2) * d
        }
        (Dzx, Dz2) => {
            r3 * l * n * fz * s + r3 * l * n * (l2 + m2 - n2) * p
                - half * r3 * l * n * (l2 + m2) * d
        }
        (Dx2y2, Dx2y2) => {
            T::of(0.75) * lm * lm * s + (l2 + m2 - lm * lm) * p + (n2 + T::of(0.25) * lm * lm) * d
        }
        (Dx2y2, Dz2) => {
            half * r3 * lm * fz * s - r3 * n2 * lm * p + T::of(0.25) * r3 * (one + n2) * lm * d
        }
        (Dz2, Dz2) => {
            fz * fz * s + three * n2 * (l2 + m2) * p + T::of(0.75) * (l2 + m2) * (l2 + m2) * d
        }
        _ => unreachable!(),
    }
}

/// Table entry with `a` of angular momentum no higher than `b`.
fn ordered<T: Real>(a: Orbital, b: Orbital, c: [T; 3], p: &SkParameters<T>) -> T {
    use Orbital::*;
    let is_star = |o| o == SStar;
    match (a.angular_momentum(), b.angular_momentum()) {
        (0, 0) => match (is_star(a), is_star(b)) {
            (false, false) => p.get(Channel::SsSigma),
            (true, true) => p.get(Channel::SStarSStarSigma),
            _ => p.get(Channel::SSStarSigma),
        },
        (0, 1) => {
            let v = if is_star(a) {
                p.get(Channel::SStarPSigma)
            } else {
                p.get(Channel::SpSigma)
            };
            c[p_index(b)] * v
        }
        (0, 2) => {
            let v = if is_star(a) {
                p.get(Channel::SStarDSigma)
            } else {
                p.get(Channel::SdSigma)
            };
            s_d(b, c) * v
        }
        (1, 1) => {
            let (i, j) = (p_index(a), p_index(b));
            let (sigma, pi) = (p.get(Channel::PpSigma), p.get(Channel::PpPi));
            let delta = if i == j { pi } else { T::zero() };
            c[i] * c[j] * (sigma - pi) + delta
        }
        (1, 2) => p_d(a, b, c, p.get(Channel::PdSigma), p.get(Channel::PdPi)),
        (2, 2) => d_d(
            a,
            b,
            c,
            p.get(Channel::DdSigma),
            p.get(Channel::DdPi),
            p.get(Channel::DdDelta),
        ),
        _ => unreachable!("ordered by angular momentum"),
    }
}

/// ⟨a on atom 1|H|b on atom 2⟩ with `c` the unit vector from atom 1 to atom 2.
pub fn hopping<T: Real>(a: Orbital, b: Orbital, c: [T; 3], p: &SkParameters<T>) -> T {
    if a.angular_momentum() <= b.angular_momentum() {
        ordered(a, b, c, p)
    } else {
        let v = ordered(b, a, c, p);
        if (a.angular_momentum() + b.angular_momentum()) % 2 == 1 {
            -v
        } else {
            v
        }
    }
}

/// Row-major block `H[a][b]` for every orbital pair of the basis.
pub fn hopping_block<T: Real>(basis: OrbitalBasis, c: [T; 3], p: &SkParameters<T>) -> Vec<T> {
    let orbs = basis.orbitals();
    let mut block = Vec::with_capacity(orbs.len() * orbs.len());
    for &a in orbs {
        for &b in orbs {
            block.push(hopping(a, b, c, p));
        }
    }
    block
}
