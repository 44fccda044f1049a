"""How certifier trust adds up, and how quickly a liar loses it.

Known peers (met during initialisation) start at 0.75, strangers at 0.5.
Several certifiers of the same key combine by noisy-OR.
"""

import random

from certmesh.identity import OracleScheme, fabricate_key, generate_keypair, issue_certificate
from certmesh.trust import KeyCandidate, TrustTable, apply_outcome, combine_trust, decide_key

scheme = OracleScheme()
keys = {i: generate_keypair(i, random.Random(i), scheme) for i in range(10)}
real, fake = fabricate_key("real"), fabricate_key("fake")


def vouch(key, *issuers):
    cand = KeyCandidate(key)
    for i in issuers:
        cand.add(issue_certificate(keys[i], i, 9, key, 0.0, 120.0, scheme))
    return cand


print("combined trust of n strangers / n known peers")
for n in range(1, 5):
    print(f"  n={n}:  {combine_trust([0.5] * n):.4f}   {combine_trust([0.75] * n):.4f}")

table = TrustTable(owner=0, known={1, 2})
for mpktv in (0.5, 0.7, 0.9, 0.95):
    cands = [vouch(real, 1, 2), vouch(fake, 5, 6, 7)]
    d = decide_key(cands, table, mpktv)
    who = "undecided" if d is None else ("real" if d.key == real else "fake")
    print(f"mpktv {mpktv:.2f}: real {cands[0].combined_trust(table):.4f} vs fake "
          f"{cands[1].combined_trust(table):.4f} -> {who}")

# two known peers still beat three colluding strangers; once the real key wins,
# everyone who vouched for the rival is halved
cands = [vouch(real, 1, 2), vouch(fake, 5, 6, 7)]
d = decide_key(cands, table, 0.9)
losers = apply_outcome(table, cands, d)
print("penalised:", losers, "trust now", {n: round(table[n], 4) for n in (1, 2, 5, 6, 7)})
print("node 5 alone can still clear 0.5?", decide_key([vouch(fake, 5)], table, 0.5) is not None)
