//! Float helpers that work without `std`.

// Some float methods are inherent in `core` and some only in `std`, so
// whether this import is needed depends on the build.
pub(crate) use num_traits::Float;

pub(crate) fn deg(rad: f64) -> f64 {
    rad.to_degrees()
}

pub(crate) fn rad(deg: f64) -> f64 {
    deg.to_radians()
}

pub(crate) fn hypot(x: f64, y: f64) -> f64 {
    Float::hypot(x, y)
}
