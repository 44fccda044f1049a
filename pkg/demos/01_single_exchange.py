"""Walk one public-key exchange across a five-node chain.

Node 0 wants node 4's key.  Node 2 met node 4 during initialisation and holds
a certificate for it; nobody knows node 0.  We print every message on the
wire and then what each side ended up holding.
"""

import io
import random

from certmesh.identity import OracleScheme, generate_keypair
from certmesh.protocol import Node, ProtocolParams
from certmesh.sim import MobilityState, Network, RadioModel, Simulator
from certmesh.sim.scenario import pre_certify

trace = io.StringIO()
scheme = OracleScheme()
sim = Simulator(trace=trace)
# 200 m apart with a 250 m radio: each node hears only its direct neighbours
mobility = MobilityState.static([(200.0 * i, 0.0) for i in range(5)], area=(1000.0, 100.0))
net = Network(sim, mobility, RadioModel(range=250.0, hop_delay=0.001))
nodes = {i: Node(i, generate_keypair(i, random.Random(i), scheme), net, ProtocolParams(), scheme)
         for i in range(5)}
net.nodes = nodes

pre_certify(nodes[2], nodes[4])

session = nodes[0].start_exchange(4, mpktv=0.5)
sim.run(1.0)

print("time(s)   kind     src  dst  request")
for line in trace.getvalue().splitlines():
    t, kind, src, dst, rid = line.split("\t")
    print(f"{float(t):8.4f}  {kind:<7}  {src:>3}  {dst:>3}  {rid}")

print()
print("session state :", session.state.value)
print("accepted key  :", session.accepted_key.short())
print("node 4's key  :", nodes[4].keys.public.short())
print("vouched by    :", sorted(session.decision.certifiers))
print(f"delay         : {1000 * session.delay:.1f} ms")
print("node 0 now certified by", sorted(nodes[0].certifiers), "and trusts", dict(sorted(nodes[0].table.entries.items())))
print("node 4 now certified by", sorted(nodes[4].certifiers))
