#include "scenemotion/orchestrator.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace scenemotion {

namespace {

std::string lower(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool contains_word(const std::string& haystack, const std::string& needle) {
    const auto pos = haystack.find(needle);
    if (pos == std::string::npos) return false;
    const bool left_ok = pos == 0 || !std::isalpha(static_cast<unsigned char>(haystack[pos - 1]));
    const auto end = pos + needle.size();
    const bool right_ok =
        end >= haystack.size() || !std::isalpha(static_cast<unsigned char>(haystack[end]));
    return left_ok && right_ok;
}

// first registry id mentioned in the text
std::optional<std::string> find_object_mention(const std::string& text, const SceneModel& scene) {
    for (const auto& [id, obj] : scene.dynamic_objects)
        if (contains_word(text, lower(id))) return id;
    for (const auto& [id, obj] : scene.static_objects)
        if (contains_word(text, lower(id))) return id;
    return std::nullopt;
}

// a standing spot next to an object, biased toward the room center
Vec3 approach_point(const SceneModel& scene, const Vec3& object_loc, double distance) {
    const Vec3 center = 0.5 * (scene.bounds.min + scene.bounds.max);
    Vec2 dir(center.x() - object_loc.x(), center.y() - object_loc.y());
    if (dir.norm() < 1e-6) dir = Vec2(0, 1);
    dir.normalize();
    return Vec3(object_loc.x() + distance * dir.x(), object_loc.y() + distance * dir.y(), 0.95);
}

PlanStep walk_step(int id, const Vec3& goal, double speed, const std::string& text) {
    PlanStep s;
    s.step_id = id;
    s.stage = StageType::kLocomotion;
    s.goal_point = goal;
    s.speed = speed;
    s.text = text;
    return s;
}

}  // namespace

InstructionPlan RulePlanner::plan(const std::string& instruction, const SceneModel& scene,
                                  const Vec3& goal) {
    if (instruction.empty()) throw PlanError("plan: empty instruction", "");
    const std::string text = lower(instruction);
    const auto object = find_object_mention(text, scene);

    InstructionPlan plan;
    int id = 1;

    auto object_loc = [&](const std::string& fallback_id) -> std::optional<Vec3> {
        if (object) return scene.object_location(*object);
        if (auto loc = scene.object_location(fallback_id)) return loc;
        return std::nullopt;
    };

    if (contains_word(text, "sit") || contains_word(text, "seat")) {
        const auto seat = object_loc("sofa");
        const std::string seat_id = object.value_or("sofa");
        const Vec3 target = seat.value_or(goal);
        plan.steps.push_back(walk_step(id++, approach_point(scene, target, 0.55), speed_,
                                       "walk forward"));
        PlanStep sit;
        sit.step_id = id++;
        sit.stage = StageType::kSceneObjectInteraction;
        sit.text = "sit down on the " + seat_id;
        sit.object_id = scene.static_objects.count(seat_id) ? std::optional<std::string>(seat_id)
                                                            : std::nullopt;
        sit.goal_point = target;
        plan.steps.push_back(sit);
        return plan;
    }

    if (contains_word(text, "drink") || contains_word(text, "sip")) {
        const auto bottle = object_loc("bottle");
        const std::string obj_id = object.value_or("bottle");
        if (bottle) {
            plan.steps.push_back(walk_step(id++, approach_point(scene, *bottle, 0.55), speed_,
                                           "walk forward"));
            PlanStep grasp;
            grasp.step_id = id++;
            grasp.stage = StageType::kGrasp;
            grasp.text = "pick up the " + obj_id + " with the right hand";
            grasp.object_id = obj_id;
            grasp.goal_point = *bottle + Vec3(0, 0, 0.11);
            plan.steps.push_back(grasp);
        }
        PlanStep drink;
        drink.step_id = id++;
        drink.stage = StageType::kSmallObjectInteraction;
        drink.text = "drink water from the " + obj_id;
        drink.object_id = bottle ? std::optional<std::string>(obj_id) : std::nullopt;
        plan.steps.push_back(drink);
        return plan;
    }

    if (contains_word(text, "pick") || contains_word(text, "grab") ||
        contains_word(text, "take") || contains_word(text, "reach") ||
        contains_word(text, "fetch")) {
        const auto loc = object_loc("bottle");
        const std::string obj_id = object.value_or("bottle");
        const Vec3 target = loc ? *loc + Vec3(0, 0, 0.11) : goal;
        plan.steps.push_back(walk_step(id++, approach_point(scene, target, 0.55), speed_,
                                       "walk forward"));
        PlanStep grasp;
        grasp.step_id = id++;
        grasp.stage = StageType::kGrasp;
        grasp.text = "pick up the " + obj_id + " with the right hand";
        grasp.object_id = loc ? std::optional<std::string>(obj_id) : std::nullopt;
        grasp.goal_point = target;
        plan.steps.push_back(grasp);
        return plan;
    }

    if (contains_word(text, "put") || contains_word(text, "place") ||
        contains_word(text, "set")) {
        const std::string obj_id = object.value_or("bottle");
        plan.steps.push_back(walk_step(id++, approach_point(scene, goal, 0.55), speed_,
                                       "walk forward"));
        PlanStep put;
        put.step_id = id++;
        put.stage = StageType::kPutDown;
        put.text = "put down the " + obj_id + " with the right hand";
        put.object_id = scene.dynamic_objects.count(obj_id)
                            ? std::optional<std::string>(obj_id)
                            : std::nullopt;
        put.goal_point = goal;
        plan.steps.push_back(put);
        return plan;
    }

    if (contains_word(text, "stand") || contains_word(text, "wait") ||
        contains_word(text, "stay")) {
        PlanStep stay;
        stay.step_id = id++;
        stay.stage = StageType::kStationary;
        stay.text = "stand still";
        plan.steps.push_back(stay);
        return plan;
    }

    if (contains_word(text, "walk") || contains_word(text, "go") ||
        contains_word(text, "move") || contains_word(text, "head")) {
        plan.steps.push_back(walk_step(id++, goal, speed_, "walk forward"));
        return plan;
    }

    // unknown instruction: walk to the goal, then treat the instruction as a
    // generic in-place interaction
    plan.steps.push_back(walk_step(id++, goal, speed_, "walk forward"));
    PlanStep act;
    act.step_id = id++;
    act.stage = StageType::kSmallObjectInteraction;
    act.text = instruction;
    plan.steps.push_back(act);
    return plan;
}

// ---------------------------------------------------------------------------
// Remote backend

std::string build_planner_prompt(const std::string& action,
                                 const std::vector<std::string>& example_steps) {
    std::ostringstream examples;
    examples << "[";
    for (std::size_t i = 0; i < example_steps.size(); ++i) {
        if (i) examples << ", ";
        examples << "'" << example_steps[i] << "'";
    }
    examples << "]";

    std::ostringstream p;
    p << "I need you to help me complete a task now. I will give you a target action. "
         "The target action is:\""
      << action
      << ".\" You need to give in English a number of steps that I need to complete the target "
         "action. The steps should be as concise as possible without the need for irrelevant "
         "attributives. The details of the interaction action are not required. For example, "
         "there is no need to open the game console. The steps are divided into three "
         "categories: locomotion, grasp, and interaction, where locomotion only includes the "
         "movement of the person's position, Grasp only consists of the grabbing and touching "
         "of objects, and interaction includes people's operations on the appliance (such as "
         "listening to music with headphones, turning the door handle to open the door "
         "(excluding grabbing the door handle) )), indicate the hand when it comes to hand "
         "movements. Please complete this task according to some step examples I gave you. "
         "Example: \""
      << examples.str()
      << ",\" output format: [{\"step\" :,\"step_id\":1,\"category\":},...], only output the "
         "final format, no other nonsense";
    return p.str();
}

InstructionPlan parse_planner_response(const std::string& body, const SceneModel& scene,
                                       const Vec3& goal, double default_speed) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw PlanError(std::string("planner: invalid JSON: ") + e.what(), body);
    }
    if (j.is_object() && j.contains("output")) {
        try {
            j = nlohmann::json::parse(j.at("output").get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw PlanError(std::string("planner: invalid output payload: ") + e.what(), body);
        }
    }
    if (!j.is_array() || j.empty()) throw PlanError("planner: expected a non-empty array", body);

    InstructionPlan plan;
    for (const auto& e : j) {
        if (!e.is_object() || !e.contains("step") || !e.contains("step_id") ||
            !e.contains("category"))
            throw PlanError("planner: step entries need step/step_id/category", body);
        PlanStep s;
        s.text = e.at("step").get<std::string>();
        s.step_id = e.at("step_id").get<int>();
        const std::string cat = lower(e.at("category").get<std::string>());
        const std::string step_text = lower(s.text);
        if (cat == "locomotion") {
            s.stage = StageType::kLocomotion;
        } else if (cat == "grasp") {
            s.stage =
                contains_word(step_text, "put") ? StageType::kPutDown : StageType::kGrasp;
        } else if (cat == "interaction") {
            if (contains_word(step_text, "sit") || contains_word(step_text, "lie"))
                s.stage = StageType::kSceneObjectInteraction;
            else
                s.stage = StageType::kSmallObjectInteraction;
        } else {
            throw PlanError("planner: unknown category '" + cat + "'", body);
        }
        s.speed = default_speed;
        s.object_id = find_object_mention(step_text, scene);
        if (s.object_id) {
            const auto loc = scene.object_location(*s.object_id);
            if (loc) {
                if (s.stage == StageType::kLocomotion)
                    s.goal_point = approach_point(scene, *loc, 0.55);
                else if (s.stage == StageType::kGrasp || s.stage == StageType::kPutDown)
                    s.goal_point = *loc + Vec3(0, 0, 0.11);
                else
                    s.goal_point = *loc;
            }
        }
        if (!s.goal_point && s.stage == StageType::kLocomotion) s.goal_point = goal;
        plan.steps.push_back(std::move(s));
    }
    // step ids must be consecutive from 1
    for (std::size_t i = 0; i < plan.steps.size(); ++i)
        if (plan.steps[i].step_id != static_cast<int>(i) + 1)
            throw PlanError("planner: step ids must be consecutive from 1", body);
    return plan;
}

RemotePlanner::RemotePlanner(PlannerClientConfig cfg, double default_speed)
    : cfg_(std::move(cfg)), speed_(default_speed) {}

InstructionPlan RemotePlanner::plan(const std::string& instruction, const SceneModel& scene,
                                    const Vec3& goal) {
    const char* url = std::getenv(cfg_.url_env.c_str());
    if (!url) throw PlanError("planner: " + cfg_.url_env + " not set", "");

    std::string base(url), path = "/";
    const auto scheme_end = base.find("://");
    const auto path_pos = base.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_pos != std::string::npos) {
        path = base.substr(path_pos);
        base = base.substr(0, path_pos);
    }

    const std::vector<std::string> examples = {
        "walk to the sofa", "sit down on the sofa", "pick up remote with left hand",
        "turn on TV with left hand", "watch TV"};
    nlohmann::json req{{"prompt", build_planner_prompt(instruction, examples)}};

    httplib::Client client(base);
    client.set_read_timeout(60, 0);
    httplib::Headers headers;
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()))
        headers.emplace("Authorization", std::string("Bearer ") + key);
    const auto res = client.Post(path, headers, req.dump(), "application/json");
    if (!res) throw PlanError("planner: request failed", "");
    if (res->status != 200)
        throw PlanError("planner: HTTP " + std::to_string(res->status), res->body);
    return parse_planner_response(res->body, scene, goal, speed_);
}

InstructionPlan plan_from_instruction(const std::string& instruction, const SceneModel& scene,
                                      const Vec3& goal, PlannerBackend& backend) {
    if (instruction.empty()) throw PlanError("plan: empty instruction", "");
    return backend.plan(instruction, scene, goal);
}

std::unique_ptr<PlannerBackend> make_planner(const PlannerClientConfig& cfg,
                                             double default_speed) {
    if (cfg.mode == "remote") return std::make_unique<RemotePlanner>(cfg, default_speed);
    return std::make_unique<RulePlanner>(default_speed);
}

}  // namespace scenemotion
