use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use qcompat_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    unsafe {
        qc_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn device(name: &str, d: usize, param: Option<f64>) -> Result<*mut QcDevice, QcStatus> {
    let name = CString::new(name).unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe {
        qc_device_new(
            name.as_ptr(),
            d,
            param.is_some(),
            param.unwrap_or(0.0),
            &mut out,
        )
    };
    if status == QcStatus::Ok {
        Ok(out)
    } else {
        Err(status)
    }
}

#[test]
fn region_membership_and_interval() {
    let mut inside = false;
    unsafe {
        assert_eq!(
            qc_in_region(QcPair::MeterChannel, 2, 0.8, 0.5, false, &mut inside),
            QcStatus::Ok
        );
        assert!(inside);
        assert_eq!(
            qc_in_region(QcPair::MeterChannel, 2, 0.82, 0.5, false, &mut inside),
            QcStatus::Ok
        );
        assert!(!inside);
        let (mut lo, mut hi) = (0.0, 0.0);
        assert_eq!(
            qc_s_interval(QcPair::MeterChannel, 3, -0.125, &mut lo, &mut hi),
            QcStatus::Ok
        );
        assert!((hi - 0.875).abs() < 1e-12);
        assert!(lo <= hi);
    }
}

#[test]
fn inadmissible_input_sets_message() {
    let mut inside = false;
    let status = unsafe { qc_in_region(QcPair::MeterMeter, 1, 0.1, 0.1, false, &mut inside) };
    assert_ne!(status, QcStatus::Ok);
    assert!(!last_error().is_empty());
    let status = unsafe { qc_in_region(QcPair::MeterMeter, 2, 0.1, 0.1, false, &mut inside) };
    assert_eq!(status, QcStatus::Ok);
    assert!(last_error().is_empty());
    let status = unsafe { qc_in_region(QcPair::MeterMeter, 2, f64::NAN, 0.1, false, &mut inside) };
    assert_eq!(status, QcStatus::InvalidArgument);
}

#[test]
fn error_message_length_query_and_truncation() {
    unsafe {
        let mut inside = false;
        qc_in_region(QcPair::MeterMeter, 2, 5.0, 0.1, false, &mut inside);
        let n = qc_last_error_message(ptr::null_mut(), 0);
        assert!(n > 4);
        let mut buf = [1 as c_char; 4];
        assert_eq!(qc_last_error_message(buf.as_mut_ptr(), 4), n);
        assert_eq!(buf[3], 0);
    }
}

#[test]
fn null_outputs_are_rejected() {
    unsafe {
        assert_eq!(
            qc_in_region(QcPair::MeterMeter, 2, 0.1, 0.1, false, ptr::null_mut()),
            QcStatus::NullPointer
        );
        assert_eq!(
            qc_s_interval(QcPair::MeterMeter, 2, 0.1, ptr::null_mut(), ptr::null_mut()),
            QcStatus::NullPointer
        );
        assert_eq!(
            qc_device_new(ptr::null(), 2, false, 0.0, ptr::null_mut()),
            QcStatus::NullPointer
        );
        let mut report = QcReport::default();
        assert_eq!(
            qc_device_check(ptr::null(), &mut report),
            QcStatus::NullPointer
        );
        let (mut found, mut r) = (false, 0.0);
        assert_eq!(
            qc_detect_depolarizing(ptr::null(), 1e-9, &mut found, &mut r),
            QcStatus::NullPointer
        );
        qc_device_free(ptr::null_mut());
        qc_channel_free(ptr::null_mut());
    }
}

#[test]
fn boundary_samples_sit_on_the_ellipse() {
    let n = 17;
    let (mut s, mut t) = (vec![0.0; n], vec![0.0; n]);
    unsafe {
        assert_eq!(
            qc_sample_boundary(
                QcPair::MeterMeter,
                3,
                false,
                n,
                s.as_mut_ptr(),
                t.as_mut_ptr()
            ),
            QcStatus::Ok
        );
    }
    for (s, t) in s.into_iter().zip(t) {
        let rhs = 2.0 / 3f64.sqrt() * ((1.0 - s) * (1.0 - t)).sqrt();
        assert!((s + t - 1.0 - rhs).abs() < 1e-9);
    }
}

#[test]
fn noise_coefficients() {
    let (mut a, mut b) = (0.0, 0.0);
    unsafe {
        assert_eq!(qc_noise_coeffs(1, 2, 1.0, &mut a, &mut b), QcStatus::Ok);
    }
    assert!((a - 1.0).abs() < 1e-12 && b.abs() < 1e-12);
    unsafe {
        assert_eq!(qc_noise_coeffs(1, 2, 0.0, &mut a, &mut b), QcStatus::Ok);
    }
    assert!(a.abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
    assert_ne!(
        unsafe { qc_noise_coeffs(3, 2, 0.0, &mut a, &mut b) },
        QcStatus::Ok
    );
}

#[test]
fn devices_check_and_expose_matrices() {
    for (name, d, param, kind) in [
        ("g-opt", 2, Some(0.4), QcDeviceKind::Meter),
        ("gamma-corner", 3, None, QcDeviceKind::Cloner),
        ("j-tilde", 2, Some(0.6), QcDeviceKind::Instrument),
    ] {
        let dev = device(name, d, param).unwrap();
        let mut report = QcReport::default();
        let (mut k, mut dim, mut count) = (QcDeviceKind::Meter, 0, 0);
        unsafe {
            assert_eq!(qc_device_check(dev, &mut report), QcStatus::Ok);
            assert_eq!(
                qc_device_info(dev, &mut k, &mut dim, &mut count),
                QcStatus::Ok
            );
        }
        assert!(report.passed, "{name}: {report:?}");
        assert!(report.psd_margin >= -1e-10);
        assert_eq!((k, dim), (kind, d));
        assert!(count > 0);

        let mut size = 0;
        unsafe {
            assert_eq!(
                qc_device_matrix(dev, 0, ptr::null_mut(), ptr::null_mut(), 0, &mut size),
                QcStatus::Ok
            );
            let (mut re, mut im) = (vec![0.0; size * size], vec![0.0; size * size]);
            assert_eq!(
                qc_device_matrix(dev, 0, re.as_mut_ptr(), im.as_mut_ptr(), 1, &mut size),
                QcStatus::BufferTooSmall
            );
            assert_eq!(
                qc_device_matrix(
                    dev,
                    0,
                    re.as_mut_ptr(),
                    im.as_mut_ptr(),
                    re.len(),
                    &mut size
                ),
                QcStatus::Ok
            );
            for i in 0..size {
                for j in 0..size {
                    assert!((re[i * size + j] - re[j * size + i]).abs() < 1e-12);
                    assert!((im[i * size + j] + im[j * size + i]).abs() < 1e-12);
                }
            }
            assert_eq!(
                qc_device_matrix(dev, count, ptr::null_mut(), ptr::null_mut(), 0, &mut size),
                QcStatus::InvalidArgument
            );
            qc_device_free(dev);
        }
    }
}

#[test]
fn device_errors_map_to_codes() {
    assert_eq!(
        device("no-such", 2, None).unwrap_err(),
        QcStatus::InvalidDevice
    );
    assert_eq!(
        device("g-corner", 2, None).unwrap_err(),
        QcStatus::Unsupported
    );
    assert_eq!(
        device("g-minus", 3, Some(-0.2)).unwrap_err(),
        QcStatus::Unsupported
    );
    assert_eq!(
        device("g-opt", 2, Some(3.0)).unwrap_err(),
        QcStatus::InvalidArgument
    );
    assert!(last_error().contains('3'));
}

#[test]
fn depolarizing_detection_round_trip() {
    let mut ch = ptr::null_mut();
    let (mut found, mut r) = (false, 0.0);
    unsafe {
        assert_eq!(qc_channel_depolarizing(3, -0.1, &mut ch), QcStatus::Ok);
        assert_eq!(
            qc_detect_depolarizing(ch, 1e-9, &mut found, &mut r),
            QcStatus::Ok
        );
        qc_channel_free(ch);
    }
    assert!(found);
    assert!((r + 0.1).abs() < 1e-9);
}

#[test]
fn channel_from_choi_detects_non_depolarizing() {
    // Completely dephasing qubit channel: Choi = (|00><00| + |11><11|) / 2.
    let n = 4;
    let mut re = vec![0.0; n * n];
    let im = vec![0.0; n * n];
    re[0] = 0.5;
    re[n * n - 1] = 0.5;
    let mut ch = ptr::null_mut();
    let (mut found, mut r) = (true, 0.0);
    unsafe {
        assert_eq!(
            qc_channel_from_choi(2, 2, re.as_ptr(), im.as_ptr(), &mut ch),
            QcStatus::Ok
        );
        assert_eq!(
            qc_detect_depolarizing(ch, 1e-9, &mut found, &mut r),
            QcStatus::Ok
        );
        qc_channel_free(ch);
    }
    assert!(!found);
    assert!(r.is_nan());

    re[0] = 2.0;
    let status = unsafe { qc_channel_from_choi(2, 2, re.as_ptr(), im.as_ptr(), &mut ch) };
    assert_eq!(status, QcStatus::InvalidDevice);
}

#[test]
fn feasibility_and_oracle_boundary() {
    let (mut status, mut iters, mut residual) = (QcFeasibility::Undetermined, 0, 0.0);
    unsafe {
        assert_eq!(
            qc_feasibility_check(
                QcPair::MeterChannel,
                2,
                0.3,
                0.3,
                20_000,
                &mut status,
                &mut iters,
                &mut residual
            ),
            QcStatus::Ok
        );
    }
    assert_eq!(status, QcFeasibility::Feasible);
    assert!(residual < 1e-7);

    let mut s = 0.0;
    unsafe {
        assert_eq!(
            qc_oracle_boundary(QcPair::MeterChannel, 2, 0.5, true, 50_000, &mut s),
            QcStatus::Ok
        );
    }
    assert!((s - 0.809016994).abs() < 2e-3, "{s}");
}

#[test]
fn verify_small_dimension() {
    let (mut passed, mut failed) = (0, 0);
    let dims = [2usize];
    unsafe {
        assert_eq!(
            qc_verify(dims.as_ptr(), dims.len(), &mut passed, &mut failed),
            QcStatus::Ok
        );
    }
    assert!(passed > 0);
    assert_eq!(failed, 0);
    let dims = [1usize];
    assert_ne!(
        unsafe { qc_verify(dims.as_ptr(), 1, &mut passed, &mut failed) },
        QcStatus::Ok
    );
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/qcompat.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "qc_device_new",
        "qc_device_free",
        "qc_last_error_message",
        "QC_STATUS_NULL_POINTER",
        "typedef struct QcDevice QcDevice",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .output()
    else {
        eprintln!("cc not found; skipping compile check");
        return;
    };
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
