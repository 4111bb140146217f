use std::f64::consts::TAU;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalendarFeatures {
    /// Monday = 0.
    pub day_of_week: u32,
    pub month: u32,
    pub dow_sin: f64,
    pub dow_cos: f64,
    pub month_sin: f64,
    pub month_cos: f64,
}

impl CalendarFeatures {
    pub fn encoded(&self) -> [f64; 4] {
        [self.dow_sin, self.dow_cos, self.month_sin, self.month_cos]
    }
}

pub fn calendar_features(day: NaiveDate) -> CalendarFeatures {
    let dow = day.weekday().num_days_from_monday();
    let month = day.month();
    let a = TAU * f64::from(dow) / 7.0;
    let b = TAU * f64::from(month - 1) / 12.0;
    CalendarFeatures {
        day_of_week: dow,
        month,
        dow_sin: a.sin(),
        dow_cos: a.cos(),
        month_sin: b.sin(),
        month_cos: b.cos(),
    }
}
