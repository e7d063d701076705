//! Convex lattice polygons with exact areas and Minkowski sums; mixed areas
//! give intersection numbers of nef divisors on toric surfaces.

use num_traits::Zero;

use super::ring::{q, Q};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polygon {
    /// Counter-clockwise hull vertices (may be a segment or a point).
    pub vertices: Vec<(Q, Q)>,
}

fn cross(o: &(Q, Q), a: &(Q, Q), b: &(Q, Q)) -> Q {
    (&a.0 - &o.0) * (&b.1 - &o.1) - (&a.1 - &o.1) * (&b.0 - &o.0)
}

impl Polygon {
    /// Convex hull (monotone chain).
    pub fn hull(points: &[(Q, Q)]) -> Polygon {
        let mut pts = points.to_vec();
        pts.sort();
        pts.dedup();
        if pts.len() <= 2 {
            return Polygon { vertices: pts };
        }
        let mut lower: Vec<(Q, Q)> = Vec::new();
        for p in &pts {
            while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= Q::zero() {
                lower.pop();
            }
            lower.push(p.clone());
        }
        let mut upper: Vec<(Q, Q)> = Vec::new();
        for p in pts.iter().rev() {
            while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= Q::zero() {
                upper.pop();
            }
            upper.push(p.clone());
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        Polygon { vertices: lower }
    }

    /// Shoelace area.
    pub fn area(&self) -> Q {
        let n = self.vertices.len();
        if n < 3 {
            return Q::zero();
        }
        let mut s = Q::zero();
        for i in 0..n {
            let (a, b) = (&self.vertices[i], &self.vertices[(i + 1) % n]);
            s += &a.0 * &b.1 - &b.0 * &a.1;
        }
        s / q(2)
    }

    pub fn minkowski(&self, o: &Polygon) -> Polygon {
        let pts: Vec<(Q, Q)> = self
            .vertices
            .iter()
            .flat_map(|a| o.vertices.iter().map(move |b| (&a.0 + &b.0, &a.1 + &b.1)))
            .collect();
        Polygon::hull(&pts)
    }

    /// Mixed area `D₁·D₂ = Area(P₁+P₂) − Area(P₁) − Area(P₂)`.
    pub fn mixed(&self, o: &Polygon) -> Q {
        self.minkowski(o).area() - self.area() - o.area()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: i64, y: i64) -> (Q, Q) {
        (q(x), q(y))
    }

    #[test]
    fn simplex_self_intersection() {
        // O(1) on P²: polygon area 1/2, D² = 2·area = 1
        let p = Polygon::hull(&[pt(0, 0), pt(1, 0), pt(0, 1)]);
        assert_eq!(q(2) * p.area(), q(1));
        assert_eq!(p.mixed(&p), q(1));
    }

    #[test]
    fn square_mixed_with_segments() {
        // P¹×P¹: the two rulings meet once
        let a = Polygon::hull(&[pt(0, 0), pt(1, 0)]);
        let b = Polygon::hull(&[pt(0, 0), pt(0, 1)]);
        assert_eq!(a.mixed(&b), q(1));
        assert_eq!(a.mixed(&a), q(0));
    }
}
