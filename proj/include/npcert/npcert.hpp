#pragma once

// Certification and certified training for nearest prototype classifiers.

#include "npcert/types.hpp"
#include "npcert/vec.hpp"
#include "npcert/support.hpp"
#include "npcert/model.hpp"
#include "npcert/projection.hpp"
#include "npcert/geometry.hpp"
#include "npcert/lp.hpp"
#include "npcert/qp.hpp"
#include "npcert/certify.hpp"
#include "npcert/sphere.hpp"
#include "npcert/train.hpp"
#include "npcert/report.hpp"
#include "npcert/model_io.hpp"
#include "npcert/data_io.hpp"
#include "npcert/oracle.hpp"
