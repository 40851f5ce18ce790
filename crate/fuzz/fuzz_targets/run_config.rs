#![no_main]

use libfuzzer_sys::fuzz_target;
use seglab_cli::{Command, ConfigMap, RunConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(map) = ConfigMap::parse(text) else { return };
    for command in Command::all() {
        let _ = RunConfig::from_map(command, &map);
    }
});
