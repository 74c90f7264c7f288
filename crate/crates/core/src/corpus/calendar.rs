use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Datelike, NaiveDate, NaiveTime, TimeZone, Weekday};
use chrono_tz::Tz;
use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PeriodKind {
    /// From the previous close to this day's open.
    Overnight,
    /// From this day's open to its close.
    Intraday,
}

/// A trading period, identified by the trading day it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Period {
    pub day: NaiveDate,
    pub kind: PeriodKind,
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            PeriodKind::Overnight => "overnight",
            PeriodKind::Intraday => "intraday",
        };
        write!(f, "{}:{kind}", self.day.format("%Y-%m-%d"))
    }
}

impl std::str::FromStr for Period {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (day, kind) =
            s.split_once(':').ok_or_else(|| Error::invalid(format!("period id {s:?} is not DATE:KIND")))?;
        let day =
            NaiveDate::parse_from_str(day, "%Y-%m-%d").map_err(|e| Error::invalid(format!("period id {s:?}: {e}")))?;
        let kind = match kind {
            "overnight" => PeriodKind::Overnight,
            "intraday" => PeriodKind::Intraday,
            _ => return Err(Error::invalid(format!("period id {s:?}: unknown kind"))),
        };
        Ok(Period { day, kind })
    }
}

/// Exchange trading days and session hours in the exchange's local time.
///
/// Sessions are half-open: `[open, close)` is intraday, everything else
/// (evenings, mornings before the open, weekends, holidays) belongs to the
/// overnight period ending at the next trading day's open.
#[derive(Debug, Clone)]
pub struct TradingCalendar {
    pub tz: Tz,
    pub open: NaiveTime,
    pub close: NaiveTime,
    pub first_day: NaiveDate,
    pub last_day: NaiveDate,
    pub holidays: BTreeSet<NaiveDate>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CalendarFile {
    #[serde(default = "default_tz")]
    timezone: String,
    #[serde(default = "default_open")]
    open: String,
    #[serde(default = "default_close")]
    close: String,
    first_day: String,
    last_day: String,
    #[serde(default)]
    holidays: Vec<String>,
}

fn default_tz() -> String {
    "America/New_York".into()
}
fn default_open() -> String {
    "09:30".into()
}
fn default_close() -> String {
    "16:00".into()
}

fn parse_day(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| Error::invalid(format!("date {s:?}: {e}")))
}

fn parse_time(s: &str) -> Result<NaiveTime> {
    NaiveTime::parse_from_str(s, "%H:%M").map_err(|e| Error::invalid(format!("time {s:?}: {e}")))
}

impl TradingCalendar {
    /// New York session hours (09:30–16:00) over `[first_day, last_day]`.
    pub fn new_york(first_day: NaiveDate, last_day: NaiveDate, holidays: impl IntoIterator<Item = NaiveDate>) -> Self {
        Self {
            tz: chrono_tz::America::New_York,
            open: NaiveTime::from_hms_opt(9, 30, 0).unwrap(),
            close: NaiveTime::from_hms_opt(16, 0, 0).unwrap(),
            first_day,
            last_day,
            holidays: holidays.into_iter().collect(),
        }
    }

    /// Parses the TOML calendar file (`timezone`, `open`, `close`,
    /// `first_day`, `last_day`, `holidays`).
    pub fn from_toml(text: &str) -> Result<Self> {
        let f: CalendarFile = toml::from_str(text)?;
        let tz: Tz = f.timezone.parse().map_err(|_| Error::invalid(format!("unknown time zone {:?}", f.timezone)))?;
        let cal = Self {
            tz,
            open: parse_time(&f.open)?,
            close: parse_time(&f.close)?,
            first_day: parse_day(&f.first_day)?,
            last_day: parse_day(&f.last_day)?,
            holidays: f.holidays.iter().map(|d| parse_day(d)).collect::<Result<_>>()?,
        };
        if cal.open >= cal.close {
            return Err(Error::invalid("calendar open must precede close"));
        }
        if cal.first_day > cal.last_day {
            return Err(Error::invalid("calendar first_day after last_day"));
        }
        Ok(cal)
    }

    pub fn is_trading_day(&self, day: NaiveDate) -> bool {
        !matches!(day.weekday(), Weekday::Sat | Weekday::Sun)
            && !self.holidays.contains(&day)
            && day >= self.first_day
            && day <= self.last_day
    }

    fn next_trading_day_after(&self, day: NaiveDate) -> Option<NaiveDate> {
        let mut d = day.succ_opt()?;
        while d <= self.last_day {
            if self.is_trading_day(d) {
                return Some(d);
            }
            d = d.succ_opt()?;
        }
        None
    }

    /// Maps an instant to its trading period.
    pub fn assign_period<T: TimeZone>(&self, timestamp: &DateTime<T>) -> Result<Period> {
        let local = timestamp.with_timezone(&self.tz);
        let day = local.date_naive();
        let time = local.time();
        if day < self.first_day || day > self.last_day {
            return Err(Error::OutOfRange(format!("{} outside calendar range", local.to_rfc3339())));
        }
        if self.is_trading_day(day) {
            if time >= self.open && time < self.close {
                return Ok(Period { day, kind: PeriodKind::Intraday });
            }
            if time < self.open {
                return Ok(Period { day, kind: PeriodKind::Overnight });
            }
        }
        match self.next_trading_day_after(day) {
            Some(next) => Ok(Period { day: next, kind: PeriodKind::Overnight }),
            None => {
                Err(Error::OutOfRange(format!("{} has no following trading day in the calendar", local.to_rfc3339())))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cal() -> TradingCalendar {
        // 2019-07-04 (Thursday) is a holiday.
        TradingCalendar::new_york(
            NaiveDate::from_ymd_opt(2019, 6, 3).unwrap(),
            NaiveDate::from_ymd_opt(2019, 7, 31).unwrap(),
            [NaiveDate::from_ymd_opt(2019, 7, 4).unwrap()],
        )
    }

    fn at(s: &str) -> DateTime<chrono::FixedOffset> {
        DateTime::parse_from_rfc3339(s).unwrap()
    }

    fn p(s: &str) -> Period {
        s.parse().unwrap()
    }

    #[test]
    fn period_examples() {
        let c = cal();
        // Wednesday 10:00 New York time
        assert_eq!(c.assign_period(&at("2019-06-12T10:00:00-04:00")).unwrap(), p("2019-06-12:intraday"));
        // Saturday noon → overnight ending Monday
        assert_eq!(c.assign_period(&at("2019-06-15T12:00:00-04:00")).unwrap(), p("2019-06-17:overnight"));
        // open is inclusive, close exclusive
        assert_eq!(c.assign_period(&at("2019-06-12T09:30:00-04:00")).unwrap(), p("2019-06-12:intraday"));
        assert_eq!(c.assign_period(&at("2019-06-12T09:29:59-04:00")).unwrap(), p("2019-06-12:overnight"));
        assert_eq!(c.assign_period(&at("2019-06-12T16:00:00-04:00")).unwrap(), p("2019-06-13:overnight"));
    }

    #[test]
    fn holidays_and_time_zones() {
        let c = cal();
        // Wednesday evening before the July 4th holiday → Friday's overnight
        assert_eq!(c.assign_period(&at("2019-07-03T18:00:00-04:00")).unwrap(), p("2019-07-05:overnight"));
        assert_eq!(c.assign_period(&at("2019-07-04T11:00:00-04:00")).unwrap(), p("2019-07-05:overnight"));
        // 14:00 UTC is 10:00 EDT
        assert_eq!(c.assign_period(&at("2019-06-12T14:00:00Z")).unwrap(), p("2019-06-12:intraday"));
    }

    #[test]
    fn out_of_range() {
        let c = cal();
        assert!(matches!(c.assign_period(&at("2019-05-01T10:00:00-04:00")), Err(Error::OutOfRange(_))));
        // after the last close there is no next open
        assert!(matches!(c.assign_period(&at("2019-07-31T17:00:00-04:00")), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn every_minute_maps_to_one_period() {
        let c = cal();
        let tz = c.tz;
        let start = tz.with_ymd_and_hms(2019, 6, 14, 0, 0, 0).unwrap();
        let mut prev: Option<Period> = None;
        for m in 0..(4 * 24 * 60) {
            let t = start + chrono::Duration::minutes(m);
            let per = c.assign_period(&t).unwrap();
            if let Some(q) = prev {
                // periods are visited in non-decreasing order
                assert!(per >= q, "{t}: {per} < {q}");
            }
            prev = Some(per);
        }
    }

    #[test]
    fn parses_toml_and_period_ids() {
        let c = TradingCalendar::from_toml(
            "first_day = \"2019-01-02\"\nlast_day = \"2019-12-31\"\nholidays = [\"2019-07-04\"]\n",
        )
        .unwrap();
        assert_eq!(c.open, NaiveTime::from_hms_opt(9, 30, 0).unwrap());
        assert!(!c.is_trading_day(NaiveDate::from_ymd_opt(2019, 7, 4).unwrap()));
        assert_eq!(p("2019-06-12:intraday").to_string(), "2019-06-12:intraday");
        assert!("2019-06-12".parse::<Period>().is_err());
    }
}
