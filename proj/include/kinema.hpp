#pragma once

// Umbrella header for the kinema toolkit.

#include "kinema/camera.hpp"
#include "kinema/control_signal.hpp"
#include "kinema/curation.hpp"
#include "kinema/error.hpp"
#include "kinema/image.hpp"
#include "kinema/io.hpp"
#include "kinema/kinematics.hpp"
#include "kinema/mesh.hpp"
#include "kinema/metrics.hpp"
#include "kinema/netpbm.hpp"
#include "kinema/raster.hpp"
#include "kinema/robot_model.hpp"
#include "kinema/se3.hpp"
