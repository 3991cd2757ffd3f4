use chrono::{DateTime, Datelike, Duration, TimeZone, Timelike, Utc, Weekday};
use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnKind, ColumnMeta, Series, Timestamp};

/// Civil time rule used to derive local calendar features from UTC instants.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "zone")]
pub enum ZoneRule {
    Utc,
    /// Constant offset east of UTC.
    Fixed { offset_minutes: i32 },
    /// CET (UTC+1) with the EU summer-time rule: UTC+2 from 01:00 UTC on the
    /// last Sunday of March until 01:00 UTC on the last Sunday of October.
    #[default]
    CentralEuropean,
}

fn last_sunday(year: i32, month: u32) -> DateTime<Utc> {
    let first_next = if month == 12 {
        Utc.with_ymd_and_hms(year + 1, 1, 1, 1, 0, 0)
    } else {
        Utc.with_ymd_and_hms(year, month + 1, 1, 1, 0, 0)
    }
    .unwrap();
    let mut day = first_next - Duration::days(1);
    while day.weekday() != Weekday::Sun {
        day -= Duration::days(1);
    }
    day
}

impl ZoneRule {
    /// Offset east of UTC in effect at `instant`.
    pub fn offset_minutes(&self, instant: DateTime<Utc>) -> i32 {
        match *self {
            ZoneRule::Utc => 0,
            ZoneRule::Fixed { offset_minutes } => offset_minutes,
            ZoneRule::CentralEuropean => {
                let year = instant.year();
                if instant >= last_sunday(year, 3) && instant < last_sunday(year, 10) {
                    120
                } else {
                    60
                }
            }
        }
    }

    pub fn local(&self, instant: DateTime<Utc>) -> chrono::NaiveDateTime {
        instant.naive_utc() + Duration::minutes(self.offset_minutes(instant) as i64)
    }
}

/// Local hour `0..=23`, weekday `0..=6` (Monday = 0) and month `1..=12`.
pub fn calendar_features(index: &[Timestamp], zone: ZoneRule) -> Vec<(ColumnMeta, Series)> {
    let mut hour = Vec::with_capacity(index.len());
    let mut weekday = Vec::with_capacity(index.len());
    let mut month = Vec::with_capacity(index.len());
    for ts in index {
        let local = zone.local(ts.instant());
        hour.push(Some(local.hour() as f64));
        weekday.push(Some(local.weekday().num_days_from_monday() as f64));
        month.push(Some(local.month() as f64));
    }
    vec![
        (ColumnMeta::new("hour", "h", ColumnKind::Calendar), hour),
        (ColumnMeta::new("weekday", "d", ColumnKind::Calendar), weekday),
        (ColumnMeta::new("month", "mo", ColumnKind::Calendar), month),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cal(ts: Timestamp, zone: ZoneRule) -> (f64, f64, f64) {
        let cols = calendar_features(&[ts], zone);
        (
            cols[0].1[0].unwrap(),
            cols[1].1[0].unwrap(),
            cols[2].1[0].unwrap(),
        )
    }

    #[test]
    fn local_hour_in_summer_and_winter() {
        // 2021-07-14 09:15 CEST
        let summer = Timestamp::from_ymd_hm(2021, 7, 14, 7, 15).unwrap();
        assert_eq!(cal(summer, ZoneRule::CentralEuropean).0, 9.0);
        // 2021-01-14 09:15 CET
        let winter = Timestamp::from_ymd_hm(2021, 1, 14, 8, 15).unwrap();
        assert_eq!(cal(winter, ZoneRule::CentralEuropean).0, 9.0);
        assert_eq!(cal(summer, ZoneRule::Utc).0, 7.0);
    }

    #[test]
    fn midnight_and_monday() {
        // 2021-07-12 is a Monday
        let ts = Timestamp::from_ymd_hm(2021, 7, 12, 0, 0).unwrap();
        assert_eq!(cal(ts, ZoneRule::Utc), (0.0, 0.0, 7.0));
        let sunday_late = Timestamp::from_ymd_hm(2021, 7, 11, 22, 30).unwrap();
        // 00:30 local on Monday
        assert_eq!(cal(sunday_late, ZoneRule::CentralEuropean), (0.0, 0.0, 7.0));
    }

    #[test]
    fn dst_switches() {
        let z = ZoneRule::CentralEuropean;
        let before = Timestamp::from_ymd_hm(2021, 3, 28, 0, 45).unwrap().instant();
        let after = Timestamp::from_ymd_hm(2021, 3, 28, 1, 0).unwrap().instant();
        assert_eq!(z.offset_minutes(before), 60);
        assert_eq!(z.offset_minutes(after), 120);
        let before = Timestamp::from_ymd_hm(2020, 10, 25, 0, 45).unwrap().instant();
        let after = Timestamp::from_ymd_hm(2020, 10, 25, 1, 0).unwrap().instant();
        assert_eq!(z.offset_minutes(before), 120);
        assert_eq!(z.offset_minutes(after), 60);
    }
}
