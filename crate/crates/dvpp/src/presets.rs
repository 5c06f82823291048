//! Built-in case studies, written in the scenario format.

/// Wind, PV and BESS behind the PCC at bus 2, islanded so the fleet carries every load step.
pub const CASE1: &str = "\
[system]
base_mva = 100
base_kv = 230
f_base = 50
dt = 0.001
t_end = 30
[tdes]
h_p = 5.55
d_p = 33.33
d_q = 0.01
[devices]
wind forming lpf 1.5 auto 46 1.5 p_cap=0.46
pv forming lpf 0.6 auto 73 0.6 p_cap=0.73
bess forming complement 0.2 - 60 0.2
[network]
pcc 2
line 2 wind 20
line 2 pv 20
line 2 bess 20
";

/// The case1 fleet at bus 2 of a nine-bus grid with swing-equation machines at buses 1 and 3.
pub const CASE2: &str = "\
[system]
base_mva = 100
base_kv = 230
f_base = 50
dt = 0.0005
t_end = 20
[tdes]
h_p = 5.55
d_p = 33.33
d_q = 0.01
[devices]
wind forming lpf 1.5 auto 46 1.5 p_cap=0.46
pv forming lpf 0.6 auto 73 0.6 p_cap=0.73
bess forming complement 0.2 - 60 0.2
sg1 machine swing 5 0.01 250 - bus=1
sg3 machine swing 5 0.01 64 - bus=3
[network]
pcc 2
line 1 4 17.361
line 4 5 11.765
line 4 6 10.870
line 5 7 6.211
line 6 9 5.882
line 7 8 13.889
line 8 9 9.921
line 2 7 16.0
line 3 9 17.065
line 2 wind 20
line 2 pv 20
line 2 bess 20
";

/// The case1 fleet spread over a meshed MV area coupled to the grid at buses 4 and 6.
pub const CASE3: &str = "\
[system]
base_mva = 100
base_kv = 230
f_base = 50
dt = 0.001
t_end = 10
[tdes]
h_p = 5.55
d_p = 33.33
d_q = 0.01
[devices]
wind forming lpf 1.5 auto 46 1.5 bus=m3 p_cap=0.46
pv forming lpf 0.6 auto 73 0.6 bus=m5 p_cap=0.73
bess forming complement 0.2 - 60 0.2 bus=m7
[network]
rx 1.0
poc 4 6
line 4 m1 8.0
line m1 m2 6.0
line m2 m3 5.0
line m3 m4 6.0
line m4 6 8.0
line m2 m5 4.0
line m4 m6 5.0
line m6 m7 4.0
line m5 m6 3.0
[events]
load 1 m2 -0.2
montecarlo 24 0.4 2.0 2024
";
