#![no_main]

use libfuzzer_sys::fuzz_target;
use seglab_cli::DomainSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(DomainSpec::Box(sides)) = DomainSpec::parse(text) {
        // Keep resolution cheap; huge boxes are valid but slow.
        if sides.iter().product::<usize>() <= 1 << 16 {
            let _ = DomainSpec::Box(sides).resolve();
        }
    }
});
