use serde::{Deserialize, Serialize};

use super::{Cumulative, State};
use crate::error::{Error, Result};
use crate::exec::SimRng;
use crate::linalg::Matrix;
use crate::model::check_stochastic;
use crate::spectral;

fn default_depth() -> usize {
    48
}

/// A Markov measure on a one-sided subshift of finite type.
///
/// `A` is the 0/1 adjacency matrix of allowed transitions and `Q` a
/// stochastic matrix supported on it. The state seen by observables is the
/// word `x₀ x₁ … x_{D−1}` of the next `depth` symbols; the shift drops the
/// first symbol. Deeper windows only reveal more of the same symbol stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubshiftSpec {
    #[serde(rename = "A")]
    pub adjacency: Vec<Vec<u8>>,
    #[serde(rename = "Q")]
    pub q: Matrix,
    #[serde(default = "default_depth")]
    pub depth: usize,
}

impl SubshiftSpec {
    /// Full shift on `weights.len()` symbols with i.i.d. letters.
    pub fn bernoulli(weights: &[f64]) -> Result<Self> {
        let s = weights.len();
        let q = Matrix::from_rows(&vec![weights.to_vec(); s])?;
        Ok(SubshiftSpec {
            adjacency: vec![vec![1; s]; s],
            q,
            depth: default_depth(),
        })
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    /// Stationary symbol law of `Q`.
    pub fn symbol_law(&self) -> Result<Vec<f64>> {
        self.validate()?;
        spectral::stationary(&self.q)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.adjacency.len();
        if s == 0 || s > u8::MAX as usize + 1 {
            return Err(Error::Dimension(format!("alphabet size {s} outside 1..=256")));
        }
        if self.adjacency.iter().any(|r| r.len() != s) || self.q.rows() != s || self.q.cols() != s {
            return Err(Error::Dimension("A and Q must be square of the same size".into()));
        }
        if self.adjacency.iter().flatten().any(|&a| a > 1) {
            return Err(Error::InvalidParameter("A must be a 0/1 matrix".into()));
        }
        if self.depth == 0 {
            return Err(Error::InvalidParameter("window depth must be positive".into()));
        }
        check_stochastic(&self.q)?;
        for i in 0..s {
            for j in 0..s {
                if self.adjacency[i][j] == 0 && self.q[(i, j)] > 0.0 {
                    return Err(Error::ForbiddenTransition {
                        from: i,
                        to: j,
                        mass: self.q[(i, j)],
                    });
                }
            }
        }
        Ok(())
    }

    pub(crate) fn compile(&self) -> Result<Compiled> {
        let nu = self.symbol_law()?;
        Ok(Compiled {
            rows: (0..self.q.rows()).map(|i| Cumulative::new(self.q.row(i))).collect(),
            initial: Cumulative::new(&nu),
            depth: self.depth,
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Compiled {
    rows: Vec<Cumulative>,
    initial: Cumulative,
    depth: usize,
}

impl Compiled {
    pub(crate) fn depth(&self) -> usize {
        self.depth
    }

    pub(crate) fn initial(&self, rng: &mut SimRng) -> State {
        let d = self.depth;
        let mut buf = vec![0u8; 2 * d];
        buf[0] = self.initial.draw(rng) as u8;
        for t in 1..d {
            buf[t] = self.rows[buf[t - 1] as usize].draw(rng) as u8;
        }
        State::Word { buf, start: 0 }
    }

    pub(crate) fn step(&self, buf: &mut [u8], start: &mut usize, rng: &mut SimRng) {
        let d = self.depth;
        let next = self.rows[buf[*start + d - 1] as usize].draw(rng) as u8;
        if *start + d == buf.len() {
            buf.copy_within(*start + 1.., 0);
            *start = 0;
            buf[d - 1] = next;
        } else {
            buf[*start + d] = next;
            *start += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observable::StatePoint;
    use crate::systems::StationarySampler;

    fn golden_mean() -> SubshiftSpec {
        SubshiftSpec {
            adjacency: vec![vec![1, 1], vec![1, 0]],
            q: Matrix::from_rows(&[vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap(),
            depth: 8,
        }
    }

    fn first_symbols(s: &StationarySampler, n: usize) -> Vec<f64> {
        s.trajectory(n, |p| match p {
            StatePoint::Word(w) => w[0] as f64,
            _ => f64::NAN,
        })
    }

    #[test]
    fn forbidden_mass_is_rejected() {
        let mut spec = golden_mean();
        spec.q = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.9, 0.1]]).unwrap();
        match spec.validate() {
            Err(Error::ForbiddenTransition { from: 1, to: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn golden_mean_never_repeats_one() {
        let s = StationarySampler::subshift(&golden_mean(), 3).unwrap();
        let xs = first_symbols(&s, 5000);
        assert!(xs.windows(2).all(|w| !(w[0] == 1.0 && w[1] == 1.0)));
        let ones = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((ones - 1.0 / 3.0).abs() < 0.03, "{ones}");
    }

    #[test]
    fn depth_does_not_change_the_symbol_stream() {
        let shallow = StationarySampler::subshift(&golden_mean().with_depth(3), 9).unwrap();
        let deep = StationarySampler::subshift(&golden_mean().with_depth(40), 9).unwrap();
        let a = first_symbols(&shallow, 300);
        let b = first_symbols(&deep, 300);
        // the deep walker has drawn 37 more symbols ahead, but the stream agrees
        assert_eq!(a, b);
    }

    #[test]
    fn window_is_the_shifted_word() {
        let s = StationarySampler::subshift(&golden_mean().with_depth(5), 1).unwrap();
        let mut w = s.start();
        for _ in 0..40 {
            let before: Vec<u8> = match w.point() {
                StatePoint::Word(x) => x.to_vec(),
                _ => unreachable!(),
            };
            w.step();
            let StatePoint::Word(after) = w.point() else { unreachable!() };
            assert_eq!(&before[1..], &after[..4]);
        }
    }
}
