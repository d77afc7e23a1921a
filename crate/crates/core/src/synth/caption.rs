use super::{MvKind, MvTransform, PrimaryAttrs, SecondaryAttrs, Shapelet, TrendDirection};

fn shapelet_phrase(s: Shapelet) -> &'static str {
    match s {
        Shapelet::None => "no local pattern",
        Shapelet::SinglePeak => "a single peak",
        Shapelet::Sag => "a sag",
        Shapelet::DoublePeaks => "double peaks",
    }
}

/// Renders one clause per attribute in schema order.
pub fn render_caption(primary: &PrimaryAttrs, secondary: &SecondaryAttrs, transform: Option<&MvTransform>) -> String {
    let mut clauses = Vec::with_capacity(8);
    clauses.push(format!("The series follows a {} trend", primary.trend_type.name()));
    clauses.push(match primary.trend_direction {
        TrendDirection::Up => "the trend goes upward".to_string(),
        TrendDirection::Down => "the trend goes downward".to_string(),
    });
    clauses.push(match primary.season_cycles {
        0 => "it has no seasonal cycle".to_string(),
        1 => "it completes 1 seasonal cycle".to_string(),
        n => format!("it completes {n} seasonal cycles"),
    });
    for (i, &s) in secondary.segment_shapelets.iter().enumerate() {
        clauses.push(format!("segment {} shows {}", i + 1, shapelet_phrase(s)));
    }
    clauses.push(match secondary.hf_cycles {
        0 => "there is no high-frequency component".to_string(),
        n => format!("a high-frequency component oscillates {n} times"),
    });
    if let Some(t) = transform {
        let d = t.shift_distance.unwrap_or(0);
        clauses.push(match t.kind {
            MvKind::XFlip => "the second variable is the first flipped along the time axis".to_string(),
            MvKind::YFlip => "the second variable is the first flipped along the value axis".to_string(),
            MvKind::ShiftForward => format!("the second variable is the first shifted forward by {d} steps"),
            MvKind::ShiftBackward => format!("the second variable is the first shifted backward by {d} steps"),
        });
    }
    let mut caption = clauses.join(", ");
    caption.push('.');
    caption
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::TrendType;

    #[test]
    fn caption_mentions_every_attribute() {
        let p = PrimaryAttrs::new(TrendType::Linear, TrendDirection::Up, 2).unwrap();
        let s = SecondaryAttrs::new(16, [Shapelet::None, Shapelet::SinglePeak, Shapelet::None]).unwrap();
        let c = render_caption(&p, &s, None);
        for phrase in ["linear trend", "upward", "2 seasonal cycles", "segment 2 shows a single peak", "oscillates 16 times"] {
            assert!(c.contains(phrase), "missing '{phrase}' in {c}");
        }
    }

    #[test]
    fn transform_clause_is_appended() {
        let p = PrimaryAttrs::new(TrendType::Logistic, TrendDirection::Down, 0).unwrap();
        let s = SecondaryAttrs::new(0, [Shapelet::Sag; 3]).unwrap();
        let t = MvTransform::shift(MvKind::ShiftBackward, 27).unwrap();
        let c = render_caption(&p, &s, Some(&t));
        assert!(c.ends_with("shifted backward by 27 steps."));
        assert!(c.contains("no seasonal cycle"));
    }
}
