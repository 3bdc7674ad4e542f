//! Bitwise majority voting of three core interfaces.
use odrg::cpu::{CoreInterface, DataReq, FetchReq, Signal};
use odrg::odrg::{vote3, vote_interfaces};

fn main() {
    let (voted, mismatch) = vote3(0b1100, 0b1010, 0b1001);
    println!("vote3(1100, 1010, 1001) = {voted:04b}, mismatch {mismatch:?}");

    let good = CoreInterface {
        fetch: FetchReq { valid: true, addr: 0x1040 },
        data: DataReq { valid: true, addr: 0x1000_0100, write: true, byte_enable: 0xf, wdata: 42 },
        sleeping: false,
    };
    let mut bad = good;
    bad.flip(Signal::DataWdata, 3);
    let result = vote_interfaces(&[good, bad, good]);
    println!("core 1 wdata {} -> voted {}", bad.data.wdata, result.voted.data.wdata);
    println!("mismatch flags {:?}", result.mismatch);
}
