SPEED_OF_LIGHT = 3e8

# vehicle type id -> (accel m/s^2, decel m/s^2, length m, max speed m/s)
VEHICLE_TYPES = {
    "CarA": (3.0, 6.0, 5.0, 30.0),
    "CarB": (2.0, 6.0, 7.5, 30.0),
    "CarC": (1.0, 5.0, 5.0, 20.0),
    "CarD": (1.0, 5.0, 7.5, 10.0),
}

# default density x seed sweep
VEHICLE_COUNTS = (10, 20, 30, 40, 50, 60, 70)
SEEDS = (2, 4, 6, 8, 10)

# radio calibration, 250 m reception range
TX_POWER_W = 0.2818
FREQUENCY_HZ = 2412e6
RX_THRESH_W = 3.65262e-10
CS_THRESH_FACTOR = 0.9
ANTENNA_HEIGHT_M = 1.5

IFQ_LEN = 50

# header and message sizes in bytes
UDP_HEADER = 8
IP_HEADER = 20
MAC_HEADER = 28
ACK_SIZE = 14
RREQ_SIZE = 24
RREP_SIZE = 20
RERR_BASE_SIZE = 4
RERR_PER_DEST = 8

DATA_TTL = 32

BROADCAST = "*"

DROP_REASONS = ("IFQ", "RET", "NRTE", "LNK", "COL", "TTL", "END")
