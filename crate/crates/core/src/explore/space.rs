use serde::{Deserialize, Serialize};

use super::ExploreError;
use crate::arch::{make_template, ArchSpec, Family};

/// A finite grid of template parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub family: Family,
    pub width_multipliers: Vec<f64>,
    pub depth_choices: Vec<usize>,
    /// Empty for families without a dense bottleneck.
    pub bottleneck_dims: Vec<usize>,
}

/// One grid point, identified by its coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchPoint {
    /// Row-major index into the grid.
    pub index: usize,
    /// Indices into widths, depths and bottlenecks.
    pub coords: [usize; 3],
    pub family: Family,
    pub width_multiplier: f64,
    pub depth: usize,
    pub bottleneck_dim: Option<usize>,
}

impl SearchPoint {
    pub fn arch(&self) -> Result<ArchSpec, ExploreError> {
        Ok(make_template(self.family, self.width_multiplier, self.depth, self.bottleneck_dim)?)
    }
}

impl SearchSpace {
    /// Validates the grid, including that every point builds.
    pub fn new(
        family: Family,
        width_multipliers: Vec<f64>,
        depth_choices: Vec<usize>,
        bottleneck_dims: Vec<usize>,
    ) -> Result<Self, ExploreError> {
        let space = Self {
            family,
            width_multipliers,
            depth_choices,
            bottleneck_dims,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<(), ExploreError> {
        let bad = |m: String| Err(ExploreError::InvalidSpace(m));
        if self.width_multipliers.is_empty() || self.depth_choices.is_empty() {
            return bad("width and depth choices must be non-empty".into());
        }
        match (self.family, self.bottleneck_dims.is_empty()) {
            (Family::SliderDenseBottleneck, true) => {
                return bad("slider spaces need at least one bottleneck dim".into())
            }
            (Family::FanConv, false) => return bad("fan_conv spaces take no bottleneck dims".into()),
            _ => {}
        }
        for p in self.points() {
            p.arch()
                .map_err(|e| ExploreError::InvalidSpace(format!("point {}: {e}", p.index)))?;
        }
        Ok(())
    }

    fn dims(&self) -> [usize; 3] {
        [
            self.width_multipliers.len(),
            self.depth_choices.len(),
            self.bottleneck_dims.len().max(1),
        ]
    }

    pub fn len(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point_at(&self, coords: [usize; 3]) -> SearchPoint {
        let d = self.dims();
        SearchPoint {
            index: (coords[0] * d[1] + coords[1]) * d[2] + coords[2],
            coords,
            family: self.family,
            width_multiplier: self.width_multipliers[coords[0]],
            depth: self.depth_choices[coords[1]],
            bottleneck_dim: self.bottleneck_dims.get(coords[2]).copied(),
        }
    }

    pub fn point(&self, index: usize) -> SearchPoint {
        let d = self.dims();
        self.point_at([index / (d[1] * d[2]), (index / d[2]) % d[1], index % d[2]])
    }

    pub fn points(&self) -> impl Iterator<Item = SearchPoint> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    /// Points one grid step away along a single coordinate.
    pub fn neighbours(&self, p: &SearchPoint) -> Vec<SearchPoint> {
        let d = self.dims();
        let mut out = Vec::new();
        for axis in 0..3 {
            for step in [-1isize, 1] {
                let c = p.coords[axis] as isize + step;
                if c >= 0 && (c as usize) < d[axis] {
                    let mut coords = p.coords;
                    coords[axis] = c as usize;
                    out.push(self.point_at(coords));
                }
            }
        }
        out
    }
}
