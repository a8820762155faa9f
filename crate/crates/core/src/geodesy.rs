//! Great-circle distances and the planar projection used by the line cuts.

use crate::model::{GeoPoint, LeagueDataset, TeamId};
use crate::scalar::Scalar;
use std::collections::HashMap;

/// Mean Earth radius in statute miles.
pub const EARTH_RADIUS_MILES: f64 = 3958.7613;

/// Haversine distance in miles.
pub fn great_circle<T: Scalar>(a: GeoPoint, b: GeoPoint) -> T {
    let rad = T::of(std::f64::consts::PI / 180.0);
    let (la1, lo1) = (T::of(a.lat) * rad, T::of(a.lon) * rad);
    let (la2, lo2) = (T::of(b.lat) * rad, T::of(b.lon) * rad);
    let two = T::of(2.0);
    let s_lat = ((la2 - la1) / two).sin();
    let s_lon = ((lo2 - lo1) / two).sin();
    let h = s_lat * s_lat + la1.cos() * la2.cos() * s_lon * s_lon;
    let h = h.min(T::one()).max(T::zero());
    two * T::of(EARTH_RADIUS_MILES) * h.sqrt().asin()
}

/// Symmetric team-by-team mileage in dataset order.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix<T> {
    ids: Vec<TeamId>,
    index: HashMap<TeamId, usize>,
    data: Vec<T>,
}

impl<T: Scalar> DistanceMatrix<T> {
    pub fn from_fn(ids: Vec<TeamId>, f: impl Fn(usize, usize) -> T) -> Self {
        let n = ids.len();
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = f(i, j);
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        let index = ids.iter().cloned().enumerate().map(|(i, id)| (id, i)).collect();
        DistanceMatrix { ids, index, data }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.ids.len() + j]
    }

    pub fn ids(&self) -> &[TeamId] {
        &self.ids
    }

    pub fn index_of(&self, id: &TeamId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn between(&self, a: &TeamId, b: &TeamId) -> Option<T> {
        Some(self.get(self.index_of(a)?, self.index_of(b)?))
    }

    pub fn row(&self, i: usize) -> &[T] {
        let n = self.ids.len();
        &self.data[i * n..(i + 1) * n]
    }

    /// Every entry multiplied by `k`.
    pub fn scaled(&self, k: T) -> Self {
        DistanceMatrix {
            ids: self.ids.clone(),
            index: self.index.clone(),
            data: self.data.iter().map(|&d| d * k).collect(),
        }
    }

    pub fn max_entry(&self) -> T {
        self.data.iter().copied().fold(T::zero(), T::max)
    }
}

/// Great-circle matrix over the dataset's teams.
pub fn distance_matrix<T: Scalar>(dataset: &LeagueDataset) -> DistanceMatrix<T> {
    let teams = &dataset.teams;
    DistanceMatrix::from_fn(dataset.ids(), |i, j| {
        great_circle(teams[i].location, teams[j].location)
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanarPoint<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> PlanarPoint<T> {
    pub fn new(x: T, y: T) -> Self {
        PlanarPoint { x, y }
    }

    pub fn sub(self, o: Self) -> Self {
        PlanarPoint::new(self.x - o.x, self.y - o.y)
    }

    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }
}

/// League-wide equirectangular projection: `x = lon * cos(mean lat)`, `y = lat`.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection<T> {
    pub cos_mean_lat: T,
    pub points: Vec<PlanarPoint<T>>,
}

impl<T: Scalar> Projection<T> {
    pub fn to_geo(&self, p: PlanarPoint<T>) -> GeoPoint {
        GeoPoint::new(p.y.as_f64(), (p.x / self.cos_mean_lat).as_f64())
    }

    /// Largest pairwise distance between projected points.
    pub fn diameter(&self) -> T {
        let mut best = T::zero();
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                best = best.max(a.sub(*b).norm());
            }
        }
        best
    }
}

pub fn projection<T: Scalar>(dataset: &LeagueDataset) -> Projection<T> {
    let n = T::of(dataset.teams.len() as f64);
    let mean_lat = dataset
        .teams
        .iter()
        .map(|t| T::of(t.location.lat))
        .sum::<T>()
        / n;
    let c = mean_lat.to_radians().cos();
    let points = dataset
        .teams
        .iter()
        .map(|t| PlanarPoint::new(T::of(t.location.lon) * c, T::of(t.location.lat)))
        .collect();
    Projection {
        cos_mean_lat: c,
        points,
    }
}

/// Projected location of every team, keyed by id.
pub fn project<T: Scalar>(dataset: &LeagueDataset) -> HashMap<TeamId, PlanarPoint<T>> {
    let p = projection::<T>(dataset);
    dataset.ids().into_iter().zip(p.points).collect()
}
