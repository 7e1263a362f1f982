use sleepstage::psg_io::parse_edf;
use sleepstage::Error;
use sleepstage_oracle::{calibrate, edf_bytes, FixtureSignal};

fn signal(label: &str, spr: usize, records: usize, pmin: f64, pmax: f64, dmin: i16, dmax: i16) -> FixtureSignal {
    let n = spr * records;
    let span = dmax as i64 - dmin as i64;
    let digital = (0..n)
        .map(|i| (dmin as i64 + (i as i64 * 7919) % (span + 1)) as i16)
        .collect();
    FixtureSignal {
        label: label.into(),
        samples_per_record: spr,
        physical_min: pmin,
        physical_max: pmax,
        digital_min: dmin,
        digital_max: dmax,
        digital,
    }
}

fn assert_calibrated(got: &[f32], s: &FixtureSignal) {
    assert_eq!(got.len(), s.digital.len());
    for (g, &d) in got.iter().zip(&s.digital) {
        let want = calibrate(d, s);
        assert!((*g as f64 - want).abs() <= 1e-6 * want.abs().max(1.0), "{g} vs {want}");
    }
}

#[test]
fn mixed_rate_file_parses_to_known_counts_and_values() {
    let eeg = signal("EEG Fpz-Cz", 100, 3, -200.0, 200.0, -2048, 2047);
    let emg = signal("EMG submental", 10, 3, -5.5, 5.5, i16::MIN, i16::MAX);
    let bytes = edf_bytes("SC4001 X X X", "3", "1", &[eeg.clone(), emg.clone()]);
    let rec = parse_edf(&bytes).unwrap();
    assert_eq!(rec.subject_id(), "SC4001");
    assert_eq!(rec.duration_s(), 3.0);
    let ch = rec.channels();
    assert_eq!((ch[0].samples.len(), ch[1].samples.len()), (300, 30));
    assert_eq!(*ch[0].sampling_hz.numer(), 100);
    assert_calibrated(&ch[0].samples, &eeg);
    assert_calibrated(&ch[1].samples, &emg);
}

#[test]
fn long_records_give_fractional_rates() {
    let s = signal("EEG C3-A2", 3, 4, 0.0, 1.0, 0, 1000);
    let rec = parse_edf(&edf_bytes("p", "4", "30", std::slice::from_ref(&s))).unwrap();
    let rate = rec.channels()[0].sampling_hz;
    assert_eq!((*rate.numer(), *rate.denom()), (1, 10));
    assert_eq!(rec.duration_s(), 120.0);
    assert_calibrated(&rec.channels()[0].samples, &s);
}

#[test]
fn unknown_record_count_is_resolved() {
    let s = signal("EEG", 50, 6, -1.0, 1.0, -100, 100);
    let rec = parse_edf(&edf_bytes("p", "-1", "1", std::slice::from_ref(&s))).unwrap();
    assert_eq!(rec.channels()[0].samples.len(), 300);
    assert_calibrated(&rec.channels()[0].samples, &s);
}

#[test]
fn annotation_channel_is_dropped() {
    let eeg = signal("EEG Pz-Oz", 20, 2, -100.0, 100.0, -32768, 32767);
    let mut ann = signal("EDF Annotations", 10, 2, -1.0, 1.0, -32768, 32767);
    ann.digital.fill(0);
    let rec = parse_edf(&edf_bytes("p", "2", "1", &[eeg, ann])).unwrap();
    assert_eq!(rec.channels().len(), 1);
    assert_eq!(rec.channels()[0].name, "EEG Pz-Oz");
}

#[test]
fn corrupt_inputs_are_rejected() {
    let s = signal("EEG", 10, 2, -1.0, 1.0, -100, 100);
    let good = edf_bytes("p", "2", "1", std::slice::from_ref(&s));
    assert!(matches!(parse_edf(&good[..good.len() - 3]), Err(Error::Structural(_))));
    assert!(matches!(parse_edf(&good[..100]), Err(Error::Parse { .. })));

    let mut bad_count = good.clone();
    bad_count[236..244].copy_from_slice(b"two     ");
    assert!(matches!(parse_edf(&bad_count), Err(Error::Parse { offset: 236, .. })));

    let inverted = FixtureSignal {
        digital_min: 100,
        digital_max: -100,
        ..s
    };
    assert!(matches!(
        parse_edf(&edf_bytes("p", "2", "1", &[inverted])),
        Err(Error::Structural(_))
    ));
}
