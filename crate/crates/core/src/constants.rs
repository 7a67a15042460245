//! Physical constants shared by every model. SI units throughout.

/// Earth gravitational parameter, m^3/s^2.
pub const MU_EARTH: f64 = 3.986_004_418e14;
/// Equatorial radius used by the orbit propagator and the drag altitude, m.
pub const EARTH_EQUATORIAL_RADIUS: f64 = 6_378_137.0;
/// Mean spherical radius used for topocentric geometry, m.
pub const EARTH_MEAN_RADIUS: f64 = 6_371_000.0;
/// Second zonal harmonic.
pub const J2: f64 = 1.082_626_68e-3;
/// Sidereal rotation rate, rad/s.
pub const EARTH_ROTATION_RATE: f64 = 7.292_115_9e-5;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Julian year, s.
pub const SECONDS_PER_YEAR: f64 = 365.25 * 86_400.0;
pub const SECONDS_PER_DAY: f64 = 86_400.0;
/// Mean obliquity of the ecliptic, degrees.
pub const OBLIQUITY_DEG: f64 = 23.44;
