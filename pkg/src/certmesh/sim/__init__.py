from certmesh.sim.adversary import AdversaryModel, AttackerNode, AttackMode, adversary_on_creq
from certmesh.sim.engine import EventQueue, Simulator
from certmesh.sim.mobility import MobilityState, position_of, step_mobility
from certmesh.sim.network import Network
from certmesh.sim.radio import RadioModel, adjacency, neighbors
from certmesh.sim.scenario import (
    ConfigError,
    ScenarioConfig,
    World,
    build_world,
    pre_certify,
    run_scenario,
)
