#pragma once

#include <matchfit/errors.hpp>
#include <matchfit/geom.hpp>
#include <matchfit/model.hpp>
#include <matchfit/metrics.hpp>
#include <matchfit/transform.hpp>
#include <matchfit/jitterfit.hpp>
#include <matchfit/tps.hpp>
#include <matchfit/splinefit.hpp>
#include <matchfit/facefit.hpp>
#include <matchfit/segeval.hpp>
#include <matchfit/olc.hpp>
#include <matchfit/pipeline.hpp>
#include <matchfit/fixture.hpp>
