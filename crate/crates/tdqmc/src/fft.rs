//! Shared FFT plans. rustfft planners cache internally; one global planner
//! hands out `Arc<dyn Fft>` objects that are freely shared across threads.

use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

type Plan = Arc<dyn Fft<f64>>;

static PLANS: LazyLock<Mutex<HashMap<(usize, bool), Plan>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

pub fn forward_plan(n: usize) -> Plan {
    plan(n, FftDirection::Forward)
}

pub fn inverse_plan(n: usize) -> Plan {
    plan(n, FftDirection::Inverse)
}

fn plan(n: usize, direction: FftDirection) -> Plan {
    let key = (n, direction == FftDirection::Forward);
    let mut plans = PLANS.lock().unwrap();
    plans
        .entry(key)
        .or_insert_with(|| FftPlanner::new().plan_fft(n, direction))
        .clone()
}

/// Grow `scratch` to the in-place scratch requirement of `plan` and run it.
pub fn process(plan: &Plan, buf: &mut [Complex64], scratch: &mut Vec<Complex64>) {
    let need = plan.get_inplace_scratch_len();
    if scratch.len() < need {
        scratch.resize(need, Complex64::default());
    }
    plan.process_with_scratch(buf, scratch);
}
