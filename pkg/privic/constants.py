MECHANISM_BA = 'ba'
MECHANISM_LAPLACE = 'laplace'

UNIT_KM = 'km'
UNIT_NATS = 'nats'
UNIT_NONE = '1'
UNIT_PER_KM = '1/km'

PMF_TOLERANCE = 1e-9
ROW_TOLERANCE = 1e-9

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR = 3
EXIT_CAPABILITY_ERROR = 4

# Desk-scale caps
MLE_ORACLE_MAX_CELLS = 6
MESH_MAX_CELLS = 4
MESH_MAX_GRANULARITY = 20

EARTH_RADIUS_KM = 6371.0088
