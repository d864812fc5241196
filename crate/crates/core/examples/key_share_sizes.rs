//! key_share and ClientHello sizes per key-exchange group, measured by
//! rendering and re-parsing a ClientHello for each.

use layertrace::synth::render_client_hello;
use layertrace::tls::{
    expected_key_share_size, expected_server_share_size, hybrid_parts, parse_client_hello_message,
    ClientHelloInfo, KeyShareEntry, NamedGroup,
};

fn main() {
    println!("{:<18} {:>9} {:>12} {:>12}  parts", "group", "key_share", "ClientHello", "server share");
    for group in NamedGroup::KNOWN {
        let len = expected_key_share_size(group).expect("known group");
        let hello = ClientHelloInfo {
            client_random: [0; 32],
            total_length: 0,
            cipher_suites: vec![0x1301, 0x1302, 0x1303],
            key_shares: vec![KeyShareEntry { group, key_exchange_length: len }],
            offered_groups: vec![group],
        };
        let parsed = parse_client_hello_message(&render_client_hello(&hello)).expect("round trip");
        let parts = hybrid_parts(group)
            .map(|(classical, kem)| format!("{classical} {} + ML-KEM {kem}", len - kem))
            .unwrap_or_default();
        println!(
            "{:<18} {:>9} {:>12} {:>12}  {parts}",
            group.to_string(),
            parsed.key_shares[0].key_exchange_length,
            parsed.total_length,
            expected_server_share_size(group).expect("known group"),
        );
    }
}
