"""Writes data/ieee39.case from the New England 39-bus network and machine data.

Network and dispatch: the widely distributed 39-bus New England data
(MATPOWER case39). Machine constants: the 10-machine two-axis data of
Pai (1989). Exciter and governor data are not part of the source set; the
values below are uniform IEEE Type-1 / IEESGO settings documented in the
case header. Bus 15 carries 12.5 % of system load so that a 20 % step there
is 2.5 % of the total; the other loads are scaled to keep the total unchanged.
Only the active part of the bus-15 load is raised. Dynamic loads draw
constant active power and behave as a constant susceptance for Q.
"""
import sys

loads = {1:(97.6,44.2),3:(322,2.4),4:(500,184),7:(233.8,84),8:(522,176.6),9:(6.5,-66.6),
12:(8.53,88),15:(320,153),16:(329,32.3),18:(158,30),20:(680,103),21:(274,115),23:(247.5,84.6),
24:(308.6,-92.2),25:(224,47.2),26:(139,17),27:(281,75.5),28:(206,27.6),29:(283.5,26.9),
31:(9.2,4.6),39:(1104,250)}
gens = [  # bus, Pg MW, Vset
 (30,250,1.0499),(31,677.871,0.982),(32,650,0.9841),(33,632,0.9972),(34,508,1.0123),
 (35,650,1.0494),(36,560,1.0636),(37,540,1.0275),(38,830,1.0265),(39,1000,1.03)]
# H, ra, xdp, xqp, xd, xq, td0p, tq0p keyed by bus (Pai 1989, 100 MVA base)
mach = {
 39:(500,0,0.006,0.008,0.02,0.019,7.0,0.7),
 31:(30.3,0,0.0697,0.170,0.295,0.282,6.56,1.5),
 32:(35.8,0,0.0531,0.0876,0.2495,0.237,5.7,1.5),
 33:(28.6,0,0.0436,0.166,0.262,0.258,5.69,1.5),
 34:(26.0,0,0.132,0.166,0.67,0.62,5.4,0.44),
 35:(34.8,0,0.05,0.0814,0.254,0.241,7.3,0.4),
 36:(26.4,0,0.049,0.186,0.295,0.292,5.66,1.5),
 37:(24.3,0,0.057,0.0911,0.290,0.280,6.7,0.41),
 38:(34.5,0,0.057,0.0587,0.2106,0.205,4.79,1.96),
 30:(42.0,0,0.031,0.008,0.1,0.069,10.2,1.0),   # source lists T'q0 = 0; 1.0 s used
}
branches = [
(1,2,0.0035,0.0411,0.6987,1),(1,39,0.001,0.025,0.75,1),(2,3,0.0013,0.0151,0.2572,1),
(2,25,0.007,0.0086,0.146,1),(2,30,0,0.0181,0,1.025),(3,4,0.0013,0.0213,0.2214,1),
(3,18,0.0011,0.0133,0.2138,1),(4,5,0.0008,0.0128,0.1342,1),(4,14,0.0008,0.0129,0.1382,1),
(5,6,0.0002,0.0026,0.0434,1),(5,8,0.0008,0.0112,0.1476,1),(6,7,0.0006,0.0092,0.113,1),
(6,11,0.0007,0.0082,0.1389,1),(6,31,0,0.025,0,1.07),(7,8,0.0004,0.0046,0.078,1),
(8,9,0.0023,0.0363,0.3804,1),(9,39,0.001,0.025,1.2,1),(10,11,0.0004,0.0043,0.0729,1),
(10,13,0.0004,0.0043,0.0729,1),(10,32,0,0.02,0,1.07),(12,11,0.0016,0.0435,0,1.006),
(12,13,0.0016,0.0435,0,1.006),(13,14,0.0009,0.0101,0.1723,1),(14,15,0.0018,0.0217,0.366,1),
(15,16,0.0009,0.0094,0.171,1),(16,17,0.0007,0.0089,0.1342,1),(16,19,0.0016,0.0195,0.304,1),
(16,21,0.0008,0.0135,0.2548,1),(16,24,0.0003,0.0059,0.068,1),(17,18,0.0007,0.0082,0.1319,1),
(17,27,0.0013,0.0173,0.3216,1),(19,20,0.0007,0.0138,0,1.06),(19,33,0.0007,0.0142,0,1.07),
(20,34,0.0009,0.018,0,1.009),(21,22,0.0008,0.014,0.2565,1),(22,23,0.0006,0.0096,0.1846,1),
(22,35,0,0.0143,0,1.025),(23,24,0.0022,0.035,0.361,1),(23,36,0.0005,0.0272,0,1),
(25,26,0.0032,0.0323,0.531,1),(25,37,0.0006,0.0232,0,1.025),(26,27,0.0014,0.0147,0.2396,1),
(26,28,0.0043,0.0474,0.7802,1),(26,29,0.0057,0.0625,1.029,1),(28,29,0.0014,0.0151,0.249,1),
(29,38,0.0008,0.0156,0,1.025)]

EXC = "tr=0.02 ka=20 ta=0.2 ke=1.0 te=0.314 kf=0.063 tf=0.35"
GOV = dict(t1=0.3, t2=0.0, t3=0.03, t4=0.07, t5=10.0, t6=0.15, t7=0.05, k2=0.53, k3=0.0)
DROOP = {30: 0.15}           # machine base (mbase below)
DROOP_OTHER = 0.35
MBASE = 1000.0

def main(out):
    total = sum(p for p, q in loads.values())
    p15 = 0.125 * total
    scale = (total - p15) / (total - loads[15][0])
    w = out.write
    w("# IEEE 39-bus New England system, 10 machines, two-axis / IEEE Type-1 / IEESGO.\n")
    w("# Generated by data/gen/make_ieee39.py; see that script for data provenance.\n")
    w("[system]\nname = ieee39\nbase_mva = 100\nf_nom = 60\nload_model = mixed\n")
    w("provenance = network+dispatch: MATPOWER case39; machines: Pai 1989 10-machine data (Tq0' of bus-30 unit set to 1.0 s); "
      "bus-15 active load raised to 12.5%% of system load (others scaled by %.6f, total preserved); exciters/governors: uniform synthetic settings; D = 0\n" % scale)
    w("\n[buses]\n")
    gbus = {b: (pg, v) for b, pg, v in gens}
    for b in range(1, 40):
        p, q = loads.get(b, (0.0, 0.0))
        if b == 15:
            p = p15
        elif b in loads:
            p *= scale; q *= scale
        typ = "slack" if b == 31 else ("pv" if b in gbus else "pq")
        line = "id=%d type=%s" % (b, typ)
        if b in gbus: line += " vset=%.4f" % gbus[b][1]
        if p or q: line += " pd=%.8g qd=%.8g" % (p / 100, q / 100)
        w(line + "\n")
    w("\n[branches]\n")
    for f, t, r, x, bb, tap in branches:
        line = "from=%d to=%d r=%g x=%g" % (f, t, r, x)
        if bb: line += " b=%g" % bb
        if tap != 1: line += " tap=%g" % tap
        w(line + "\n")
    w("\n[generators]\n")
    for i, (b, pg, v) in enumerate(gens, 1):
        h, ra, xdp, xqp, xd, xq, td0p, tq0p = mach[b]
        w("id=%d bus=%d mbase=%g pg=%g h=%g ra=%g xd=%g xdp=%g xq=%g xqp=%g td0p=%g tq0p=%g d=0\n"
          % (i, b, MBASE, pg / 100, h, ra, xd, xdp, xq, xqp, td0p, tq0p))
    w("\n[exciters]\n")
    for i in range(1, 11): w("gen=%d %s\n" % (i, EXC))
    w("\n[governors]\n")
    for i, (b, pg, v) in enumerate(gens, 1):
        r = DROOP.get(b, DROOP_OTHER)
        w("gen=%d r=%g " % (i, r) + " ".join("%s=%g" % kv for kv in GOV.items()) + "\n")

if __name__ == "__main__":
    main(open(sys.argv[1], "w") if len(sys.argv) > 1 else sys.stdout)
