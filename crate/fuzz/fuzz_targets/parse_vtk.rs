#![no_main]

use libfuzzer_sys::fuzz_target;
use microgrip::export::parse_vtk;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(file) = parse_vtk(text) {
            assert_eq!(file.cells.len(), file.cell_types.len());
            for cell in &file.cells {
                assert!(cell.iter().all(|&i| i < file.points.len()));
            }
        }
    }
});
