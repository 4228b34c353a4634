//! Dense 3D grids with x-fastest linear layout.

/// Grid extents in cells (or unit blocks), `(nx, ny, nz)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims3 {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims3 {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Dims3 { nx, ny, nz }
    }

    pub fn cube(n: usize) -> Self {
        Dims3::new(n, n, n)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear index with x fastest: `x + nx*(y + ny*z)`.
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(x < self.nx && y < self.ny && z < self.nz);
        x + self.nx * (y + self.ny * z)
    }

    pub fn contains(&self, x: usize, y: usize, z: usize) -> bool {
        x < self.nx && y < self.ny && z < self.nz
    }

    /// Component-wise division; errors are the caller's concern, panics on
    /// non-divisible inputs in debug builds only via `divides`.
    pub fn scaled_down(&self, f: usize) -> Dims3 {
        Dims3::new(self.nx / f, self.ny / f, self.nz / f)
    }

    pub fn scaled_up(&self, f: usize) -> Dims3 {
        Dims3::new(self.nx * f, self.ny * f, self.nz * f)
    }

    pub fn divisible_by(&self, f: usize) -> bool {
        f > 0 && self.nx % f == 0 && self.ny % f == 0 && self.nz % f == 0
    }
}

impl std::fmt::Display for Dims3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// Dense 3D array, linear index = `x + nx*(y + ny*z)` (x fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3<T> {
    dims: Dims3,
    data: Vec<T>,
}

impl<T: Clone + Default> Grid3<T> {
    pub fn zeros(dims: Dims3) -> Self {
        Grid3 {
            dims,
            data: vec![T::default(); dims.len()],
        }
    }
}

impl<T: Clone> Grid3<T> {
    pub fn filled(dims: Dims3, value: T) -> Self {
        Grid3 {
            dims,
            data: vec![value; dims.len()],
        }
    }
}

impl<T> Grid3<T> {
    pub fn from_vec(dims: Dims3, data: Vec<T>) -> Self {
        assert_eq!(data.len(), dims.len(), "grid data length mismatch");
        Grid3 { dims, data }
    }

    pub fn dims(&self) -> Dims3 {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> &T {
        &self.data[self.dims.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: T) {
        let i = self.dims.index(x, y, z);
        self.data[i] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Iterate `(x, y, z)` in linear (x-fastest) order.
    pub fn iter_coords(&self) -> impl Iterator<Item = (usize, usize, usize)> {
        let d = self.dims;
        (0..d.nz).flat_map(move |z| (0..d.ny).flat_map(move |y| (0..d.nx).map(move |x| (x, y, z))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_layout_is_x_fastest() {
        let d = Dims3::new(3, 2, 2);
        assert_eq!(d.index(0, 0, 0), 0);
        assert_eq!(d.index(1, 0, 0), 1);
        assert_eq!(d.index(0, 1, 0), 3);
        assert_eq!(d.index(0, 0, 1), 6);
        assert_eq!(d.index(2, 1, 1), 11);
    }

    #[test]
    fn iter_coords_matches_linear_order() {
        let g: Grid3<u8> = Grid3::zeros(Dims3::new(2, 2, 2));
        let coords: Vec<_> = g.iter_coords().collect();
        assert_eq!(coords[0], (0, 0, 0));
        assert_eq!(coords[1], (1, 0, 0));
        assert_eq!(coords[2], (0, 1, 0));
        assert_eq!(coords[4], (0, 0, 1));
        for (i, (x, y, z)) in coords.iter().enumerate() {
            assert_eq!(g.dims().index(*x, *y, *z), i);
        }
    }
}
