//! End-to-end flows through the public API, with every message passed as
//! encoded bytes.

use std::collections::BTreeMap;
use std::io::BufReader;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use groupauth::ec::CurveParams;
use groupauth::field::OpCounter;
use groupauth::protocol::{
    accept_rotation, decentralized_verify, gm_init, gm_verify, rotate_credentials, EncryptedShare, GroupConfig,
    GroupConfigExport, MemberState, ProtocolError, PublicShare,
};
use groupauth::sim::{self, Scenario, SimScheme};
use groupauth::sss::{read_shares, verify_commitment, write_shares, MemberId, Share};
use groupauth::wire::Frame;

/// Runs both stages for `shares` with all traffic serialized to bytes and
/// returns each member's recovered key.
fn run_over_wire(config: &GroupConfig, shares: &[Share], seed: u64) -> BTreeMap<MemberId, groupauth::field::FieldElement> {
    let ctx = OpCounter::disabled();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let curve = config.curve();
    let mut members: Vec<MemberState> = shares
        .iter()
        .map(|s| MemberState::new(s.clone(), config.clone()).unwrap())
        .collect();
    let broadcast: Vec<Vec<u8>> = members
        .iter()
        .map(|m| m.make_public_share(&ctx).unwrap().to_frame(config.epoch()).unwrap().encode())
        .collect();
    let received: Vec<PublicShare> = broadcast
        .iter()
        .map(|b| PublicShare::from_frame(&Frame::decode(b).unwrap(), curve).unwrap())
        .collect();
    assert!(decentralized_verify(config, &received, &ctx).unwrap());
    for m in &mut members {
        for ps in &received {
            m.receive_public_share(ps.clone()).unwrap();
        }
        m.derive_keys(&ctx).unwrap();
    }
    let mut mailbox: Vec<(MemberId, Vec<u8>)> = Vec::new();
    for m in &members {
        for msg in m.outgoing_shares(&mut rng).unwrap() {
            mailbox.push((msg.recipient.clone(), msg.to_frame().unwrap().encode()));
        }
    }
    members
        .iter_mut()
        .map(|m| {
            let own = m.member_id().clone();
            for (_, bytes) in mailbox.iter().filter(|(to, _)| *to == own) {
                let msg = EncryptedShare::from_frame(&Frame::decode(bytes).unwrap(), &own).unwrap();
                m.receive_encrypted_share(&msg).unwrap();
            }
            (own, m.finish(&ctx).unwrap())
        })
        .collect()
}

#[test]
fn secp160r1_group_agrees_over_the_wire() {
    let curve = CurveParams::builtin("secp160r1").unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let (config, shares) = gm_init(4, 7, &curve, &mut rng).unwrap();
    let keys = run_over_wire(&config, &shares[1..6], 12);
    assert_eq!(keys.len(), 5);
    let first = keys.values().next().unwrap();
    assert!(keys.values().all(|k| k == first));
    assert!(verify_commitment(first, config.commitment()));
}

#[test]
fn config_and_shares_survive_persistence() {
    let curve = CurveParams::builtin("test2017").unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let (config, shares) = gm_init(3, 6, &curve, &mut rng).unwrap();

    let export: GroupConfigExport = serde_json::from_str(&config.to_json()).unwrap();
    let restored = GroupConfig::import(&export, &curve).unwrap();
    assert_eq!(restored.to_json(), config.to_json());

    let mut buf = Vec::new();
    write_shares(&mut buf, &shares).unwrap();
    let field = restored.scalar_field().unwrap();
    let loaded = read_shares(BufReader::new(buf.as_slice()), &field).unwrap();
    assert_eq!(loaded, shares);

    let keys = run_over_wire(&restored, &loaded[..3], 4);
    assert!(verify_commitment(keys.values().next().unwrap(), restored.commitment()));
}

#[test]
fn rotation_renews_credentials_and_drops_excluded_member() {
    let curve = CurveParams::builtin("test2017").unwrap();
    let ctx = OpCounter::disabled();
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    let (config, shares) = gm_init(2, 4, &curve, &mut rng).unwrap();
    let s = run_over_wire(&config, &shares, 22).into_values().next().unwrap();

    let dropped = shares[3].member_id.clone();
    let rotation = rotate_credentials(&config, &s, std::slice::from_ref(&dropped), &mut rng).unwrap();
    assert_eq!(rotation.config.epoch(), config.epoch() + 1);
    assert_eq!(rotation.config.roster().len(), 3);

    let bundle_bytes: Vec<Vec<u8>> = rotation.bundle.iter().map(|r| r.to_frame().unwrap().encode()).collect();
    assert_eq!(bundle_bytes.len(), 3);

    let renewed: Vec<Share> = shares[..3]
        .iter()
        .map(|old| accept_rotation(&old.member_id, &s, &rotation.config, &rotation.bundle).unwrap())
        .collect();
    for (old, new) in shares.iter().zip(&renewed) {
        assert_eq!(old.x, new.x);
    }
    let keys = run_over_wire(&rotation.config, &renewed, 23);
    let new_s = keys.values().next().unwrap();
    assert!(verify_commitment(new_s, rotation.config.commitment()));

    // old-epoch public shares no longer verify
    let stale: Vec<PublicShare> = shares[..3]
        .iter()
        .map(|sh| groupauth::protocol::make_public_share(sh, &config, &ctx).unwrap())
        .collect();
    assert!(!gm_verify(&rotation.config, &rotation.gm_shares, &stale, &ctx).unwrap().accepted());
    assert!(accept_rotation(&dropped, &s, &rotation.config, &rotation.bundle).is_err());
}

#[test]
fn wrong_epoch_ciphertext_is_refused() {
    let curve = CurveParams::builtin("test2017").unwrap();
    let ctx = OpCounter::disabled();
    let mut rng = ChaCha20Rng::seed_from_u64(31);
    let (config, shares) = gm_init(2, 3, &curve, &mut rng).unwrap();
    let mut members: Vec<MemberState> = shares
        .iter()
        .map(|s| MemberState::new(s.clone(), config.clone()).unwrap())
        .collect();
    let publics: Vec<PublicShare> = members.iter().map(|m| m.make_public_share(&ctx).unwrap()).collect();
    for m in &mut members {
        for ps in &publics {
            m.receive_public_share(ps.clone()).unwrap();
        }
        m.derive_keys(&ctx).unwrap();
    }
    let mut msg = members[0].encrypt_share_for(&shares[1].member_id, &mut rng).unwrap();
    msg.epoch += 1;
    assert!(matches!(
        members[1].receive_encrypted_share(&msg),
        Err(ProtocolError::WrongEpoch { .. })
    ));
}

#[test]
fn scenario_json_round_trip_reproduces_report() {
    let mut sc = Scenario::new(SimScheme::ProposedDecentralized, 6, 3);
    sc.curve = "builtin:test2017".into();
    sc.loss_probability = 0.05;
    sc.seed = 77;
    let again = Scenario::from_json(&sc.to_json()).unwrap();
    assert_eq!(again, sc);
    assert_eq!(sim::run(&sc).unwrap(), sim::run(&again).unwrap());
}
