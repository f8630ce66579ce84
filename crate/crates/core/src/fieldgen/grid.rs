use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported cell count `N^d`.
pub const MAX_CELLS: usize = 1 << 24;

fn periodic_default() -> bool {
    true
}

/// A periodic grid of `n^d` cells with spacing `h`.
///
/// Cell `i` along an axis sits at physical coordinate `i·h`; the torus side
/// is `n·h`. Flat indices are row-major (last axis fastest).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
    pub h: f64,
    #[serde(default = "periodic_default")]
    pub periodic: bool,
}

impl GridSpec {
    pub fn new(d: usize, n: usize, h: f64) -> Result<Self> {
        let g = GridSpec {
            d,
            n,
            h,
            periodic: true,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(Error::invalid("d", format!("must be 1, 2 or 3, got {}", self.d)));
        }
        if self.n == 0 || !self.n.is_power_of_two() {
            return Err(Error::invalid("n", format!("must be a power of two, got {}", self.n)));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::invalid("h", format!("must be positive, got {}", self.h)));
        }
        if !self.periodic {
            return Err(Error::invalid("periodic", "only periodic grids are supported"));
        }
        let cells = self.n.checked_pow(self.d as u32).unwrap_or(usize::MAX);
        if cells > MAX_CELLS {
            return Err(Error::invalid("n", format!("n^d = {cells} exceeds {MAX_CELLS}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Physical side length of the torus.
    pub fn side(&self) -> f64 {
        self.n as f64 * self.h
    }

    pub fn half_side(&self) -> f64 {
        0.5 * self.side()
    }

    /// Cell volume `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    pub fn coords(&self, mut index: usize) -> [usize; 3] {
        let mut c = [0usize; 3];
        for axis in (0..self.d).rev() {
            c[axis] = index % self.n;
            index /= self.n;
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords[..self.d].iter().fold(0, |acc, &c| acc * self.n + c)
    }

    /// Index of `base` translated by the signed cell offset, wrapped.
    pub fn offset_index(&self, base: usize, offset: &[isize]) -> usize {
        let c = self.coords(base);
        let n = self.n as isize;
        let mut idx = 0usize;
        for axis in 0..self.d {
            let v = (c[axis] as isize + offset[axis]).rem_euclid(n) as usize;
            idx = idx * self.n + v;
        }
        idx
    }

    /// Minimal-image signed cell coordinate in `[-n/2, n/2)`.
    pub fn min_image(&self, c: usize) -> isize {
        let n = self.n as isize;
        let c = c as isize;
        if c >= n / 2 {
            c - n
        } else {
            c
        }
    }

    /// Minimal-image signed offsets of a flat index relative to the origin cell.
    pub fn signed_offsets(&self, index: usize) -> [isize; 3] {
        let c = self.coords(index);
        let mut o = [0isize; 3];
        for axis in 0..self.d {
            o[axis] = self.min_image(c[axis]);
        }
        o
    }

    /// Torus (minimal-image) distance of cell `index` to the origin cell.
    pub fn torus_norm(&self, index: usize) -> f64 {
        let o = self.signed_offsets(index);
        offset_norm(&o[..self.d], self.h)
    }
}

/// Euclidean length of a cell offset in physical units.
pub fn offset_norm(offset: &[isize], h: f64) -> f64 {
    let s: f64 = offset.iter().map(|&o| (o as f64) * (o as f64)).sum();
    s.sqrt() * h
}

/// All integer offsets `o` with `|o|·h ≤ radius` (or `< radius` when
/// `strict`), row-major ordered.
pub fn ball_offsets(d: usize, h: f64, radius: f64, strict: bool) -> Vec<[isize; 3]> {
    let reach = (radius / h).floor() as isize;
    let mut out = Vec::new();
    let range = -reach..=reach;
    let inside = |o: &[isize]| {
        let r = offset_norm(o, h);
        if strict {
            r < radius - 1e-12 * radius.max(h)
        } else {
            r <= radius + 1e-12 * radius.max(h)
        }
    };
    match d {
        1 => {
            for a in range.clone() {
                let o = [a, 0, 0];
                if inside(&o[..1]) {
                    out.push(o);
                }
            }
        }
        2 => {
            for a in range.clone() {
                for b in range.clone() {
                    let o = [a, b, 0];
                    if inside(&o[..2]) {
                        out.push(o);
                    }
                }
            }
        }
        _ => {
            for a in range.clone() {
                for b in range.clone() {
                    for c in range.clone() {
                        let o = [a, b, c];
                        if inside(&o[..3]) {
                            out.push(o);
                        }
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(GridSpec::new(1, 16, 1.0).is_ok());
        assert!(GridSpec::new(1, 12, 1.0).is_err());
        assert!(GridSpec::new(4, 2, 1.0).is_err());
        assert!(GridSpec::new(3, 512, 1.0).is_err());
        assert!(GridSpec::new(2, 16, 0.0).is_err());
    }

    #[test]
    fn index_roundtrip() {
        let g = GridSpec::new(3, 8, 0.5).unwrap();
        for i in [0, 1, 7, 8, 63, 64, 511] {
            let c = g.coords(i);
            assert_eq!(g.index(&c), i);
        }
        assert_eq!(g.offset_index(0, &[-1, 0, 1]), g.index(&[7, 0, 1]));
    }

    #[test]
    fn min_image_distance() {
        let g = GridSpec::new(1, 8, 0.5).unwrap();
        assert_eq!(g.torus_norm(7), 0.5);
        assert_eq!(g.torus_norm(4), 2.0);
    }

    #[test]
    fn ball_offsets_counts() {
        assert_eq!(ball_offsets(1, 1.0, 1.0, false).len(), 3);
        assert_eq!(ball_offsets(1, 1.0, 1.0, true).len(), 1);
        assert_eq!(ball_offsets(1, 1.0, 0.0, true).len(), 0);
        assert_eq!(ball_offsets(2, 1.0, 1.0, false).len(), 5);
        assert_eq!(ball_offsets(3, 1.0, 1.0, false).len(), 7);
        assert_eq!(ball_offsets(2, 1.0, 0.5, false).len(), 1);
    }
}
