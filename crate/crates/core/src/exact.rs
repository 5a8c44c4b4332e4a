//! Order-independent summation of monthly energies.
//!
//! Energies are accumulated as `i128` multiples of 2^-80 kWh. Any f64 energy
//! of at least 2^-28 kWh converts exactly, so a subset's month-wise sum is the
//! same integer whichever order its members are added or removed in, and the
//! mean derived from it is a pure function of the member set.

use crate::dataset::MonthlyProfile;

const FRACTION_BITS: i32 = 80;
const SCALE: f64 = (1u128 << 80) as f64;

/// Energies at or above this bound are rejected at validation so that sums of
/// up to 1024 homes cannot overflow.
pub const MAX_ENERGY_KWH: f64 = 1.0e10;

#[inline]
pub fn to_fixed(kwh: f64) -> i128 {
    debug_assert!((0.0..MAX_ENERGY_KWH).contains(&kwh));
    (kwh * SCALE) as i128
}

/// Mean of `count` values whose fixed-point sum is `sum`.
///
/// Exact when `count` divides `sum`, so averaging identical profiles returns
/// the profile unchanged.
#[inline]
pub fn fixed_mean(sum: i128, count: usize) -> f64 {
    debug_assert!(count > 0);
    let n = count as i128;
    let quotient = sum / n;
    let remainder = sum % n;
    let mean = quotient as f64 + remainder as f64 / count as f64;
    libm::ldexp(mean, -FRACTION_BITS)
}

/// Running month-wise sum of a multiset of monthly profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ProfileSum {
    sums: [i128; 12],
    count: usize,
}

impl ProfileSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, profile: &FixedProfile) {
        for (s, v) in self.sums.iter_mut().zip(profile.0.iter()) {
            *s += v;
        }
        self.count += 1;
    }

    #[inline]
    pub fn remove(&mut self, profile: &FixedProfile) {
        debug_assert!(self.count > 0);
        for (s, v) in self.sums.iter_mut().zip(profile.0.iter()) {
            *s -= v;
        }
        self.count -= 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn month_mean(&self, month_index: usize) -> f64 {
        fixed_mean(self.sums[month_index], self.count)
    }

    /// Month-wise mean; `None` for an empty sum.
    pub fn mean(&self) -> Option<MonthlyProfile> {
        if self.count == 0 {
            return None;
        }
        let mut out = [0.0; 12];
        for (m, v) in out.iter_mut().enumerate() {
            *v = self.month_mean(m);
        }
        Some(MonthlyProfile::new_unchecked(out))
    }
}

impl<'a> FromIterator<&'a MonthlyProfile> for ProfileSum {
    fn from_iter<I: IntoIterator<Item = &'a MonthlyProfile>>(iter: I) -> Self {
        let mut sum = ProfileSum::new();
        for p in iter {
            sum.add(&FixedProfile::from(p));
        }
        sum
    }
}

/// A monthly profile converted to fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedProfile(pub [i128; 12]);

impl From<&MonthlyProfile> for FixedProfile {
    fn from(p: &MonthlyProfile) -> Self {
        let mut out = [0i128; 12];
        for (o, v) in out.iter_mut().zip(p.values().iter()) {
            *o = to_fixed(*v);
        }
        FixedProfile(out)
    }
}

/// Arithmetic mean of profiles, independent of iteration order.
pub fn mean_profile<'a, I>(profiles: I) -> Option<MonthlyProfile>
where
    I: IntoIterator<Item = &'a MonthlyProfile>,
{
    profiles.into_iter().collect::<ProfileSum>().mean()
}
